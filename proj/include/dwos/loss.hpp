#pragma once

#include <span>
#include <vector>

#include "dwos/solvers.hpp"
#include "dwos/vec.hpp"

namespace dwos {

/// Mean squared error against reference values at measurement points.
struct LossSpec {
  std::vector<Vec3> points;
  std::vector<double> reference;
};

struct LossResult {
  double loss = 0.0;
  /// d loss / d u_i.
  std::vector<double> delta_u;
};

/// loss = (1/N) sum (u_i - r_i)^2,  delta_u_i = 2 (u_i - r_i) / N.
/// Throws LengthMismatch when the spans differ in length.
LossResult loss_and_delta(std::span<const double> u, std::span<const double> reference);
LossResult loss_and_delta(std::span<const Estimate> estimates, std::span<const double> reference);

}  // namespace dwos
