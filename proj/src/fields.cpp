#include "dwos/fields.hpp"

#include <algorithm>
#include <cmath>

#include "dwos/errors.hpp"

namespace dwos {

void bspline_weights(double u, double w[4], double dw[4], double d2w[4]) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double v = 1.0 - u;
  w[0] = v * v * v / 6.0;
  w[1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
  w[2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
  w[3] = u3 / 6.0;
  dw[0] = -0.5 * v * v;
  dw[1] = 1.5 * u2 - 2.0 * u;
  dw[2] = -1.5 * u2 + u + 0.5;
  dw[3] = 0.5 * u2;
  d2w[0] = v;
  d2w[1] = 3.0 * u - 2.0;
  d2w[2] = 1.0 - 3.0 * u;
  d2w[3] = u;
}

void GradientBuffer::clear() { std::fill(values_.begin(), values_.end(), 0.0); }

void GradientBuffer::scale(double s) {
  for (double& v : values_) v *= s;
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
  if (other.values_.size() != values_.size()) throw ShapeMismatch("gradient buffers differ in shape");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridTexture::GridTexture(std::size_t nx, std::size_t ny, Extent extent, double fill)
    : GridTexture(nx, ny, extent, std::vector<double>(nx * ny, fill)) {}

GridTexture::GridTexture(std::size_t nx, std::size_t ny, Extent extent, std::vector<double> values)
    : nx_(nx), ny_(ny), extent_(extent), values_(std::move(values)) {
  if (nx_ == 0 || ny_ == 0) throw ShapeMismatch("texture resolution must be positive");
  if (values_.size() != nx_ * ny_) throw ShapeMismatch("texture value count does not match nx*ny");
  if (!(extent_.xmax > extent_.xmin && extent_.ymax > extent_.ymin)) {
    throw ConfigError("texture extent must have positive area");
  }
}

Vec3 GridTexture::texel_center(std::size_t i, std::size_t j) const {
  const double hx = (extent_.xmax - extent_.xmin) / static_cast<double>(nx_);
  const double hy = (extent_.ymax - extent_.ymin) / static_cast<double>(ny_);
  return {extent_.xmin + (static_cast<double>(i) + 0.5) * hx, extent_.ymin + (static_cast<double>(j) + 0.5) * hy,
          0.0};
}

namespace {

struct Axis {
  std::int64_t base;  // index of tap 0
  double w[4];
  double dw[4];
  double d2w[4];
};

Axis axis_weights(double x, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  const bool clamped = x < lo || x > hi;
  const double xc = std::clamp(x, lo, hi);
  const double s = (xc - lo) / h - 0.5;
  const double fl = std::floor(s);
  Axis a;
  a.base = static_cast<std::int64_t>(fl);
  bspline_weights(s - fl, a.w, a.dw, a.d2w);
  const double inv_h = clamped ? 0.0 : 1.0 / h;
  for (int k = 0; k < 4; ++k) {
    a.dw[k] *= inv_h;
    a.d2w[k] *= inv_h * inv_h;
  }
  return a;
}

std::uint32_t clamp_index(std::int64_t i, std::size_t n) {
  return static_cast<std::uint32_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 1));
}

}  // namespace

Footprint GridTexture::footprint(const Vec3& x) const {
  const Axis ax = axis_weights(x.x, extent_.xmin, extent_.xmax, nx_);
  const Axis ay = axis_weights(x.y, extent_.ymin, extent_.ymax, ny_);
  Footprint fp;
  int k = 0;
  for (int b = 0; b < 4; ++b) {
    const std::uint32_t j = clamp_index(ay.base - 1 + b, ny_);
    for (int a = 0; a < 4; ++a, ++k) {
      const std::uint32_t i = clamp_index(ax.base - 1 + a, nx_);
      fp.index[k] = j * static_cast<std::uint32_t>(nx_) + i;
      fp.w[k] = ax.w[a] * ay.w[b];
      fp.wx[k] = ax.dw[a] * ay.w[b];
      fp.wy[k] = ax.w[a] * ay.dw[b];
      fp.wlap[k] = ax.d2w[a] * ay.w[b] + ax.w[a] * ay.d2w[b];
    }
  }
  return fp;
}

double GridTexture::eval(const Vec3& x) const {
  const Axis ax = axis_weights(x.x, extent_.xmin, extent_.xmax, nx_);
  const Axis ay = axis_weights(x.y, extent_.ymin, extent_.ymax, ny_);
  double sum = 0.0;
  for (int b = 0; b < 4; ++b) {
    const std::size_t row = clamp_index(ay.base - 1 + b, ny_) * nx_;
    double rsum = 0.0;
    for (int a = 0; a < 4; ++a) rsum += ax.w[a] * values_[row + clamp_index(ax.base - 1 + a, nx_)];
    sum += ay.w[b] * rsum;
  }
  return sum;
}

FieldSample GridTexture::eval_derivatives(const Vec3& x) const {
  const Footprint fp = footprint(x);
  FieldSample s;
  for (int k = 0; k < 16; ++k) {
    const double c = values_[fp.index[k]];
    s.value += fp.w[k] * c;
    s.dx += fp.wx[k] * c;
    s.dy += fp.wy[k] * c;
    s.laplacian += fp.wlap[k] * c;
  }
  return s;
}

void GridTexture::backward(GradientBuffer& g, const Vec3& x, double delta) const {
  if (delta == 0.0) return;
  const Footprint fp = footprint(x);
  for (int k = 0; k < 16; ++k) g[fp.index[k]] += delta * fp.w[k];
}

void GridTexture::backward(GradientBuffer& g, const Vec3& x, const FieldSample& adj) const {
  const Footprint fp = footprint(x);
  for (int k = 0; k < 16; ++k) {
    g[fp.index[k]] += adj.value * fp.w[k] + adj.dx * fp.wx[k] + adj.dy * fp.wy[k] + adj.laplacian * fp.wlap[k];
  }
}

void FieldGradient::clear() {
  texels.clear();
  scalar = 0.0;
}

void FieldGradient::scale(double s) {
  texels.scale(s);
  scalar *= s;
}

FieldGradient& FieldGradient::operator+=(const FieldGradient& other) {
  texels += other.texels;
  scalar += other.scalar;
  return *this;
}

Field Field::constant(double value) {
  Field f;
  f.constant_ = value;
  return f;
}

Field Field::texture(GridTexture tex) {
  Field f;
  f.texture_ = std::move(tex);
  return f;
}

FieldSample Field::eval_derivatives(const Vec3& x) const {
  if (texture_) return texture_->eval_derivatives(x);
  return FieldSample{constant_, 0.0, 0.0, 0.0};
}

FieldGradient Field::make_gradient() const {
  FieldGradient g;
  if (texture_) g.texels = texture_->make_gradient();
  return g;
}

void Field::backward(FieldGradient& g, const Vec3& x, double delta) const {
  if (texture_) {
    texture_->backward(g.texels, x, delta);
  } else {
    g.scalar += delta;
  }
}

void Field::backward(FieldGradient& g, const Vec3& x, const FieldSample& adjoint) const {
  if (texture_) {
    texture_->backward(g.texels, x, adjoint);
  } else {
    g.scalar += adjoint.value;
  }
}

BoundaryCondition BoundaryCondition::constant(double value) {
  BoundaryCondition b(Kind::Constant);
  b.field_ = Field::constant(value);
  return b;
}

BoundaryCondition BoundaryCondition::per_primitive(std::vector<double> values) {
  BoundaryCondition b(Kind::PerPrimitive);
  b.per_primitive_ = std::move(values);
  return b;
}

BoundaryCondition BoundaryCondition::linear(double offset, Vec3 slope) {
  BoundaryCondition b(Kind::Linear);
  b.offset_ = offset;
  b.slope_ = slope;
  return b;
}

BoundaryCondition BoundaryCondition::texture(GridTexture tex) {
  BoundaryCondition b(Kind::Texture);
  b.field_ = Field::texture(std::move(tex));
  return b;
}

double BoundaryCondition::eval(const BoundaryHit& hit) const {
  switch (kind_) {
    case Kind::Constant:
    case Kind::Texture:
      return field_.eval(hit.point);
    case Kind::PerPrimitive:
      return hit.primitive < per_primitive_.size() ? per_primitive_[hit.primitive] : 0.0;
    case Kind::Linear:
      return offset_ + dot(slope_, hit.point);
  }
  return 0.0;
}

void BoundaryCondition::backward(FieldGradient& g, const BoundaryHit& hit, double delta) const {
  if (differentiable()) field_.backward(g, hit.point, delta);
}

FieldGradient BoundaryCondition::make_gradient() const { return field_.make_gradient(); }

}  // namespace dwos
