#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dwos/geometry.hpp"
#include "dwos/vec.hpp"

namespace dwos {

/// Axis-aligned rectangle covered by a texture, in domain coordinates.
struct Extent {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 1.0;
  double ymax = 1.0;
};

/// Interpolant value with analytic spatial derivatives.
struct FieldSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double laplacian = 0.0;
};

/// The 4x4 texel neighbourhood of a lookup and the B-spline weights of each
/// texel for the value, both gradient components and the laplacian.
/// Indices may repeat near the texture edge (clamped addressing).
struct Footprint {
  std::array<std::uint32_t, 16> index{};
  std::array<double, 16> w{};
  std::array<double, 16> wx{};
  std::array<double, 16> wy{};
  std::array<double, 16> wlap{};
};

/// Per-texel accumulator with the shape of a GridTexture.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  GradientBuffer(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), values_(nx * ny, 0.0) {}

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void clear();
  void scale(double s);
  GradientBuffer& operator+=(const GradientBuffer& other);

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> values_;
};

/// Cubic B-spline texture over a rectangle.
///
/// Texel (i, j) is the spline coefficient centred at
/// (xmin + (i + 1/2) hx, ymin + (j + 1/2) hy); values are stored row-major with
/// j the row (y) index. Coefficients are used as given, without prefiltering,
/// so the interpolant is C2 but does not pass through the texel values.
/// Lookups outside the extent clamp the query point onto the extent, and
/// neighbours beyond the edge clamp to the edge texel.
class GridTexture {
 public:
  GridTexture() = default;
  GridTexture(std::size_t nx, std::size_t ny, Extent extent, double fill = 0.0);
  GridTexture(std::size_t nx, std::size_t ny, Extent extent, std::vector<double> values);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }
  const Extent& extent() const { return extent_; }

  double& at(std::size_t i, std::size_t j) { return values_[j * nx_ + i]; }
  double at(std::size_t i, std::size_t j) const { return values_[j * nx_ + i]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Centre of texel (i, j).
  Vec3 texel_center(std::size_t i, std::size_t j) const;

  double eval(const Vec3& x) const;
  FieldSample eval_derivatives(const Vec3& x) const;
  Footprint footprint(const Vec3& x) const;

  /// g[ij] += delta * w_ij(x).
  void backward(GradientBuffer& g, const Vec3& x, double delta) const;
  /// Backpropagates adjoints of the value, gradient and laplacian at x.
  void backward(GradientBuffer& g, const Vec3& x, const FieldSample& adjoint) const;

  GradientBuffer make_gradient() const { return GradientBuffer(nx_, ny_); }

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  Extent extent_;
  std::vector<double> values_;
};

/// Uniform cubic B-spline basis weights for fractional offset u in [0, 1)
/// at taps -1, 0, 1, 2, with first and second derivatives in u.
void bspline_weights(double u, double w[4], double dw[4], double d2w[4]);

/// Gradient slot of one Field: texel buffer for textures, a scalar otherwise.
struct FieldGradient {
  GradientBuffer texels;
  double scalar = 0.0;

  void clear();
  void scale(double s);
  FieldGradient& operator+=(const FieldGradient& other);
};

/// Spatial coefficient: either a constant or a texture.
class Field {
 public:
  Field() = default;
  static Field constant(double value);
  static Field texture(GridTexture tex);

  bool is_constant() const { return !texture_.has_value(); }
  double constant_value() const { return constant_; }
  void set_constant(double v) { constant_ = v; }
  double& constant_ref() { return constant_; }
  const GridTexture& tex() const { return *texture_; }
  GridTexture& tex() { return *texture_; }

  double eval(const Vec3& x) const { return texture_ ? texture_->eval(x) : constant_; }
  FieldSample eval_derivatives(const Vec3& x) const;

  FieldGradient make_gradient() const;
  /// Accumulates delta * d(value at x)/d(parameters).
  void backward(FieldGradient& g, const Vec3& x, double delta) const;
  /// Accumulates adjoints of (value, gradient, laplacian) at x.
  void backward(FieldGradient& g, const Vec3& x, const FieldSample& adjoint) const;

 private:
  double constant_ = 0.0;
  std::optional<GridTexture> texture_;
};

/// Dirichlet boundary values.
class BoundaryCondition {
 public:
  enum class Kind { Constant, PerPrimitive, Linear, Texture };

  BoundaryCondition() : BoundaryCondition(constant(0.0)) {}
  static BoundaryCondition constant(double value);
  /// One value per domain primitive.
  static BoundaryCondition per_primitive(std::vector<double> values);
  /// g(x) = offset + <slope, x>.
  static BoundaryCondition linear(double offset, Vec3 slope);
  /// Spatial texture evaluated at the boundary point.
  static BoundaryCondition texture(GridTexture tex);

  Kind kind() const { return kind_; }
  /// True for Constant and Texture kinds, which expose parameters.
  bool differentiable() const { return kind_ == Kind::Constant || kind_ == Kind::Texture; }
  const Field& field() const { return field_; }
  Field& field() { return field_; }
  const std::vector<double>& per_primitive_values() const { return per_primitive_; }

  double eval(const BoundaryHit& hit) const;
  void backward(FieldGradient& g, const BoundaryHit& hit, double delta) const;
  FieldGradient make_gradient() const;

 private:
  explicit BoundaryCondition(Kind kind) : kind_(kind) {}

  Kind kind_ = Kind::Constant;
  Field field_;
  std::vector<double> per_primitive_;
  double offset_ = 0.0;
  Vec3 slope_;
};

/// Samples a function at texel centres.
template <class F>
GridTexture texture_from_function(std::size_t nx, std::size_t ny, Extent extent, F&& fn) {
  GridTexture t(nx, ny, extent);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) t.at(i, j) = fn(t.texel_center(i, j));
  }
  return t;
}

}  // namespace dwos
