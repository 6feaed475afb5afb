#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>

#include "dwos/loss.hpp"
#include "dwos/problem.hpp"
#include "dwos/solvers.hpp"

namespace dwos {

/// Input of one reverse-mode replay. `seed` must be the seed of the primal
/// walk that produced `u_primal`.
struct AdjointInput {
  Vec3 x0;
  /// Value returned by the paired primal walk. Not needed for Poisson.
  double u_primal = std::numeric_limits<double>::quiet_NaN();
  /// d loss / d u for this walk.
  double delta_u = 0.0;
  PathSeed seed;
};

/// One gradient slot per differentiable input of a PDEProblem.
struct ParamGradients {
  FieldGradient source;
  FieldGradient sigma;
  FieldGradient alpha;
  FieldGradient boundary;

  void clear();
  void scale(double s);
  ParamGradients& operator+=(const ParamGradients& other);
};

/// Zeroed gradients shaped like the fields of p.
ParamGradients make_gradients(const PDEProblem& p);

/// Differential walk on spheres for the Poisson equation. The throughput is
/// parameter independent, so u_primal is not used.
void grad_poisson(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace = nullptr);
/// Path-replay gradient of the screened walk: source texture, scalar sigma
/// and boundary parameters.
void grad_screened(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace = nullptr);
/// Path-replay gradient of the delta-tracking walk: source, sigma and alpha.
void grad_elliptic(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace = nullptr);
/// Dispatches on p.kind.
void grad_walk(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace = nullptr);

/// Replays every walk of `primal` with delta_u[i] per point and returns the
/// gradient of the loss. Per-walk contributions are accumulated unnormalised
/// in fixed blocks of points, summed pairwise in a fixed order and divided
/// by the walk count, so the result does not depend on `threads`.
ParamGradients run_adjoint_pass(const PDEProblem& p, std::span<const Vec3> points, const PrimalPass& primal,
                                std::span<const double> delta_u, std::uint64_t seed, std::size_t threads = 1);

/// Loss, its gradient and the primal pass that produced both.
struct LossGradient {
  double loss = 0.0;
  ParamGradients gradients;
  PrimalPass primal;
};

/// Primal pass, loss_and_delta, then the paired adjoint pass.
LossGradient loss_gradient(const PDEProblem& p, const LossSpec& loss, std::size_t n_walks, std::uint64_t seed,
                           std::size_t threads = 1);

enum class ParamField { Source, Sigma, Alpha, Boundary };

/// A single scalar parameter: a texel, or the constant when texel is empty.
struct ParamRef {
  ParamField field = ParamField::Source;
  std::optional<std::size_t> texel;
};

/// Mutable access to the referenced parameter. Throws ShapeMismatch when the
/// reference does not match the field's representation.
double& parameter(PDEProblem& p, const ParamRef& ref);
const FieldGradient& gradient_slot(const ParamGradients& g, ParamField field);
double gradient_value(const ParamGradients& g, const ParamRef& ref);

/// (f(theta + h) - f(theta - h)) / (2 h).
double central_difference(const std::function<double(double)>& f, double theta, double h);

/// Central finite difference of the Monte Carlo loss in one parameter. Both
/// evaluations use the same seed (common random numbers).
double fd_oracle(const PDEProblem& p, const LossSpec& loss, const ParamRef& ref, double h, std::size_t n_walks,
                 std::uint64_t seed, std::size_t threads = 1);

}  // namespace dwos
