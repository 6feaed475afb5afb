#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "dwos/vec.hpp"

namespace dwos {

/// Which side of a primitive belongs to the domain.
enum class Side {
  Inside,   ///< the domain is inside the primitive (outer wall)
  Outside,  ///< the domain is outside the primitive (obstacle)
};

/// Circle in 2D, sphere in 3D.
struct Ball {
  Vec3 center;
  double radius = 1.0;
  Side side = Side::Inside;
};

/// Axis-aligned box (rectangle in 2D; z extents are ignored there).
struct Box {
  Vec3 lo;
  Vec3 hi;
  Side side = Side::Inside;
};

/// Two-sided wall segment, 2D only. Contributes boundary but no interior.
struct Segment {
  Vec3 a;
  Vec3 b;
};

using Primitive = std::variant<Ball, Box, Segment>;

/// Result of a boundary query.
struct BoundaryHit {
  Vec3 point;                  ///< closest point on the selected primitive
  double distance = 0.0;       ///< unsigned distance to the boundary, 0 if exterior
  std::size_t primitive = 0;   ///< index of the primitive that owns `point`
  bool exterior = false;       ///< the query point was not inside the domain
};

struct Bounds {
  Vec3 lo;
  Vec3 hi;
};

/// Fixed region built as the intersection of primitive half-spaces.
///
/// Each primitive reports a signed distance that is positive on its domain
/// side; the domain is where every signed distance is positive. The boundary
/// distance is the minimum over primitives, which is exact whenever the
/// primitive boundaries do not cross each other.
///
/// Ties between primitives resolve to the lowest primitive index. Within a
/// primitive: a ball center projects to center + (R, 0, 0); a point inside a
/// box equidistant to several faces projects to the lowest axis, `lo` face
/// before `hi` face.
class Domain {
 public:
  Domain(int dimension, std::vector<Primitive> primitives);

  int dimension() const { return dimension_; }
  const std::vector<Primitive>& primitives() const { return primitives_; }

  double signed_distance(const Vec3& x) const;
  bool contains(const Vec3& x) const { return signed_distance(x) > 0.0; }

  /// Radius of the largest ball around x inside the domain; 0 if exterior.
  double distance_to_boundary(const Vec3& x) const;

  /// Non-throwing query used by the walks.
  BoundaryHit query(const Vec3& x) const;

  /// Projection onto the boundary. Throws ExteriorPoint outside the domain.
  Vec3 closest_boundary_point(const Vec3& x) const;

  Bounds bounds() const { return bounds_; }
  double diameter() const;

 private:
  int dimension_;
  std::vector<Primitive> primitives_;
  Bounds bounds_;
};

/// Termination band around the boundary.
struct EpsilonShell {
  double epsilon = 1e-3;

  /// 1e-3 times the domain diameter by default.
  static EpsilonShell for_domain(const Domain& d, double relative = 1e-3);
  /// Throws ConfigError unless 0 < epsilon < diameter / 100.
  void validate(const Domain& d) const;
};

bool in_epsilon_shell(const Domain& d, const Vec3& x, const EpsilonShell& eps);

/// Unit disk centered at the origin.
Domain unit_disk();
/// Unit square [0,1]^2.
Domain unit_square();

}  // namespace dwos
