#pragma once

#include <cstddef>

#include "dwos/fields.hpp"
#include "dwos/geometry.hpp"
#include "dwos/kernels.hpp"

namespace dwos {

enum class PdeKind {
  Poisson,          ///< Delta u = -f
  ScreenedPoisson,  ///< Delta u - sigma u = -f, scalar sigma
  Elliptic,         ///< div(alpha grad u) - sigma u = -f
};

const char* to_string(PdeKind kind);

/// Everything a walk needs: PDE coefficients, boundary data, domain and
/// walk controls. Dirichlet data g is applied on the whole boundary.
struct PDEProblem {
  PdeKind kind = PdeKind::Poisson;
  Domain domain = unit_disk();
  Field source = Field::constant(0.0);
  BoundaryCondition boundary = BoundaryCondition::constant(0.0);
  Field sigma = Field::constant(0.0);
  Field alpha = Field::constant(1.0);
  /// Fictitious screening for the elliptic solver; must be positive.
  double sigma_bar = 0.0;
  EpsilonShell eps{2e-3};
  int max_steps = 10000;
  double radial_tolerance = kDefaultRadialTolerance;

  /// Checks the invariants of the selected kind. Throws ConfigError, or
  /// NonpositiveAlpha when alpha <= 0 somewhere on a dense probe grid.
  void validate() const;
};

/// sigma'(x) = sigma/alpha + 1/2 [lap(alpha)/alpha - 1/2 |grad log alpha|^2].
/// Throws NonpositiveAlpha if alpha(x) <= 0.
double sigma_prime(const PDEProblem& p, const Vec3& x);

/// 1.5 times the largest sigma' over a probe grid of the domain, floored at
/// 1 / diameter^2.
double default_sigma_bar(const PDEProblem& p, std::size_t probes_per_axis = 128);

}  // namespace dwos
