#include "dwos/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

#include "dwos/errors.hpp"

namespace dwos {
namespace {

struct PrimitiveHit {
  double signed_distance;
  Vec3 point;
};

double coord(const Vec3& v, int axis) { return axis == 0 ? v.x : axis == 1 ? v.y : v.z; }

void set_coord(Vec3& v, int axis, double value) {
  if (axis == 0) {
    v.x = value;
  } else if (axis == 1) {
    v.y = value;
  } else {
    v.z = value;
  }
}

PrimitiveHit hit_ball(const Ball& b, const Vec3& x) {
  const Vec3 d = x - b.center;
  const double r = norm(d);
  Vec3 p;
  if (r > 0.0) {
    p = b.center + d * (b.radius / r);
  } else {
    p = b.center + Vec3{b.radius, 0.0, 0.0};
  }
  const double sd = b.side == Side::Inside ? b.radius - r : r - b.radius;
  return {sd, p};
}

PrimitiveHit hit_box(const Box& b, const Vec3& x, int dim) {
  bool inside = true;
  for (int a = 0; a < dim; ++a) {
    const double c = coord(x, a);
    if (c <= coord(b.lo, a) || c >= coord(b.hi, a)) inside = false;
  }
  double unsigned_dist;
  Vec3 p = x;
  if (inside) {
    unsigned_dist = std::numeric_limits<double>::infinity();
    int best_axis = 0;
    bool best_hi = false;
    for (int a = 0; a < dim; ++a) {
      const double dlo = coord(x, a) - coord(b.lo, a);
      const double dhi = coord(b.hi, a) - coord(x, a);
      if (dlo < unsigned_dist) {
        unsigned_dist = dlo;
        best_axis = a;
        best_hi = false;
      }
      if (dhi < unsigned_dist) {
        unsigned_dist = dhi;
        best_axis = a;
        best_hi = true;
      }
    }
    set_coord(p, best_axis, best_hi ? coord(b.hi, best_axis) : coord(b.lo, best_axis));
  } else {
    double sq = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double c = std::clamp(coord(x, a), coord(b.lo, a), coord(b.hi, a));
      const double diff = coord(x, a) - c;
      sq += diff * diff;
      set_coord(p, a, c);
    }
    unsigned_dist = std::sqrt(sq);
  }
  const bool domain_side = (b.side == Side::Inside) == inside;
  return {domain_side ? unsigned_dist : -unsigned_dist, p};
}

PrimitiveHit hit_segment(const Segment& s, const Vec3& x) {
  const Vec3 u = s.b - s.a;
  const double len2 = dot(u, u);
  const double t = len2 > 0.0 ? std::clamp(dot(x - s.a, u) / len2, 0.0, 1.0) : 0.0;
  const Vec3 p = s.a + u * t;
  return {distance(x, p), p};
}

PrimitiveHit hit_primitive(const Primitive& prim, const Vec3& x, int dim) {
  return std::visit(
      [&](const auto& p) -> PrimitiveHit {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Ball>) {
          return hit_ball(p, x);
        } else if constexpr (std::is_same_v<T, Box>) {
          return hit_box(p, x, dim);
        } else {
          return hit_segment(p, x);
        }
      },
      prim);
}

Bounds compute_bounds(const std::vector<Primitive>& prims, int dim) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vec3 lo{inf, inf, dim == 3 ? inf : 0.0};
  Vec3 hi{-inf, -inf, dim == 3 ? -inf : 0.0};
  bool bounded = false;
  auto grow = [&](const Vec3& a, const Vec3& b) {
    bounded = true;
    lo.x = std::min(lo.x, a.x);
    lo.y = std::min(lo.y, a.y);
    hi.x = std::max(hi.x, b.x);
    hi.y = std::max(hi.y, b.y);
    if (dim == 3) {
      lo.z = std::min(lo.z, a.z);
      hi.z = std::max(hi.z, b.z);
    }
  };
  for (const auto& prim : prims) {
    if (const auto* b = std::get_if<Ball>(&prim); b && b->side == Side::Inside) {
      const Vec3 r{b->radius, b->radius, b->radius};
      grow(b->center - r, b->center + r);
    } else if (const auto* bx = std::get_if<Box>(&prim); bx && bx->side == Side::Inside) {
      grow(bx->lo, bx->hi);
    } else if (const auto* s = std::get_if<Segment>(&prim)) {
      grow(Vec3{std::min(s->a.x, s->b.x), std::min(s->a.y, s->b.y), 0.0},
           Vec3{std::max(s->a.x, s->b.x), std::max(s->a.y, s->b.y), 0.0});
    }
  }
  if (!bounded) throw ConfigError("domain has no bounding primitive (needs an Inside ball/box or segments)");
  return {lo, hi};
}

}  // namespace

Domain::Domain(int dimension, std::vector<Primitive> primitives)
    : dimension_(dimension), primitives_(std::move(primitives)) {
  if (dimension_ != 2 && dimension_ != 3) throw ConfigError("domain dimension must be 2 or 3");
  if (primitives_.empty()) throw ConfigError("domain needs at least one primitive");
  for (const auto& prim : primitives_) {
    if (const auto* b = std::get_if<Ball>(&prim); b && !(b->radius > 0.0)) {
      throw ConfigError("ball radius must be positive");
    }
    if (const auto* bx = std::get_if<Box>(&prim)) {
      if (!(bx->hi.x > bx->lo.x && bx->hi.y > bx->lo.y && (dimension_ == 2 || bx->hi.z > bx->lo.z))) {
        throw ConfigError("box must have hi > lo on every axis");
      }
    }
    if (std::holds_alternative<Segment>(prim) && dimension_ != 2) {
      throw ConfigError("segment walls are only supported in 2D");
    }
  }
  bounds_ = compute_bounds(primitives_, dimension_);
}

double Domain::signed_distance(const Vec3& x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : primitives_) best = std::min(best, hit_primitive(prim, x, dimension_).signed_distance);
  return best;
}

BoundaryHit Domain::query(const Vec3& x) const {
  BoundaryHit out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    const PrimitiveHit h = hit_primitive(primitives_[i], x, dimension_);
    if (h.signed_distance < best) {
      best = h.signed_distance;
      out.point = h.point;
      out.primitive = i;
    }
  }
  out.exterior = !(best > 0.0);
  out.distance = out.exterior ? 0.0 : best;
  return out;
}

double Domain::distance_to_boundary(const Vec3& x) const {
  const double sd = signed_distance(x);
  return sd > 0.0 ? sd : 0.0;
}

Vec3 Domain::closest_boundary_point(const Vec3& x) const {
  const BoundaryHit h = query(x);
  if (h.exterior) throw ExteriorPoint("closest_boundary_point: query point is outside the domain");
  return h.point;
}

double Domain::diameter() const { return norm(bounds_.hi - bounds_.lo); }

EpsilonShell EpsilonShell::for_domain(const Domain& d, double relative) {
  return EpsilonShell{relative * d.diameter()};
}

void EpsilonShell::validate(const Domain& d) const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive, got " + std::to_string(epsilon));
  if (!(epsilon < d.diameter() / 100.0)) {
    throw ConfigError("epsilon must be below diameter/100 (" + std::to_string(d.diameter() / 100.0) + "), got " +
                      std::to_string(epsilon));
  }
}

bool in_epsilon_shell(const Domain& d, const Vec3& x, const EpsilonShell& eps) {
  return d.distance_to_boundary(x) < eps.epsilon;
}

Domain unit_disk() { return Domain(2, {Ball{Vec3{}, 1.0, Side::Inside}}); }

Domain unit_square() { return Domain(2, {Box{Vec3{0.0, 0.0, 0.0}, Vec3{1.0, 1.0, 0.0}, Side::Inside}}); }

}  // namespace dwos
