#include "dwos/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dwos/errors.hpp"
#include "dwos/parallel.hpp"

namespace dwos {

void ParamGradients::clear() {
  source.clear();
  sigma.clear();
  alpha.clear();
  boundary.clear();
}

void ParamGradients::scale(double s) {
  source.scale(s);
  sigma.scale(s);
  alpha.scale(s);
  boundary.scale(s);
}

ParamGradients& ParamGradients::operator+=(const ParamGradients& o) {
  source += o.source;
  sigma += o.sigma;
  alpha += o.alpha;
  boundary += o.boundary;
  return *this;
}

ParamGradients make_gradients(const PDEProblem& p) {
  ParamGradients g;
  g.source = p.source.make_gradient();
  g.sigma = p.sigma.make_gradient();
  g.alpha = p.alpha.make_gradient();
  g.boundary = p.boundary.make_gradient();
  return g;
}

namespace {

// The replayed remainder must return to zero once every primal contribution
// has been subtracted again; anything else means the walk diverged.
void check_residual(double u_primal, double residual, double magnitude) {
  if (!std::isfinite(u_primal)) return;
  if (!(std::abs(residual) <= 1e-9 * magnitude + 1e-300)) {
    throw ReplayDivergence("adjoint replay diverged from the primal walk (residual " + std::to_string(residual) +
                           ", primal " + std::to_string(u_primal) + ")");
  }
}

// Replay of screened_walk. With differentiate_sigma the scalar sigma slot
// receives the source-term and throughput derivatives.
void screened_replay(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, double sigma,
                     bool differentiate_sigma, WalkTrace* trace) {
  Sampler sampler(a.seed);
  const int dim = p.domain.dimension();
  const double delta = a.delta_u;
  Vec3 x = a.x0;
  double beta = 1.0;
  double u_rem = a.u_primal;
  double magnitude = std::abs(a.u_primal);
  for (int step = 0;; ++step) {
    const BoundaryHit hit = p.domain.query(x);
    if (trace) trace->vertices.push_back(x);
    if (hit.distance < p.eps.epsilon) {
      const double contribution = beta * p.boundary.eval(hit);
      p.boundary.backward(g.boundary, hit, delta * beta);
      u_rem -= contribution;
      magnitude += std::abs(contribution);
      if (trace) trace->events.push_back(WalkEvent::Boundary);
      break;
    }
    if (step >= p.max_steps) {
      if (trace) trace->events.push_back(WalkEvent::Aborted);
      break;
    }
    const BallKernel k(dim, x, hit.distance, sigma);
    const Vec3 y = sample_green_point(k, sampler, p.radial_tolerance);
    const double f = p.source.eval(y);
    const double contribution = beta * (f * k.green_norm());
    p.source.backward(g.source, y, (delta * beta) * k.green_norm());
    if (differentiate_sigma) {
      // Detached: the Green pdf is held fixed, so only G(x, y) itself varies.
      const double r = distance(y, x);
      if (r > 0.0 && r < hit.distance) {
        g.sigma.scalar += delta * beta * f * k.green_norm() * k.dlog_green_dsigma(r);
      }
    }
    u_rem -= contribution;
    magnitude += std::abs(contribution);

    x = sample_sphere_point(k, sampler);
    // u_rem now holds the beta-weighted tail that the throughput factor scales.
    if (differentiate_sigma) g.sigma.scalar += delta * u_rem * k.dlog_throughput_dsigma();
    beta *= k.throughput();
    if (trace) trace->events.push_back(WalkEvent::Surface);
  }
  check_residual(a.u_primal, u_rem, magnitude);
}

double sigma_prime_of(double sigma, const FieldSample& a) {
  const double inv = 1.0 / a.value;
  const double grad_log2 = (a.dx * a.dx + a.dy * a.dy) * inv * inv;
  return sigma * inv + 0.5 * (a.laplacian * inv - 0.5 * grad_log2);
}

}  // namespace

void grad_poisson(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace) {
  screened_replay(p, a, g, 0.0, false, trace);
}

void grad_screened(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace) {
  if (!p.sigma.is_constant()) throw ConfigError("grad_screened needs a scalar sigma");
  if (!std::isfinite(a.u_primal)) throw ConfigError("grad_screened needs the primal walk value");
  screened_replay(p, a, g, p.sigma.constant_value(), true, trace);
}

void grad_elliptic(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace) {
  if (!(p.sigma_bar > 0.0)) throw ConfigError("grad_elliptic needs sigma_bar > 0");
  if (!std::isfinite(a.u_primal)) throw ConfigError("grad_elliptic needs the primal walk value");
  Sampler sampler(a.seed);
  const int dim = p.domain.dimension();
  const double sigma_bar = p.sigma_bar;
  const double delta = a.delta_u;
  Vec3 x = a.x0;
  double alpha_x = p.alpha.eval(x);
  if (!(alpha_x > 0.0)) throw NonpositiveAlpha("alpha <= 0 at walk start");
  double beta = 1.0;
  double u_rem = a.u_primal;
  double magnitude = std::abs(a.u_primal);
  for (int step = 0;; ++step) {
    const BoundaryHit hit = p.domain.query(x);
    if (trace) trace->vertices.push_back(x);
    if (hit.distance < p.eps.epsilon) {
      const double contribution = beta * p.boundary.eval(hit);
      p.boundary.backward(g.boundary, hit, delta * beta);
      u_rem -= contribution;
      magnitude += std::abs(contribution);
      if (trace) trace->events.push_back(WalkEvent::Boundary);
      break;
    }
    if (step >= p.max_steps) {
      if (trace) trace->events.push_back(WalkEvent::Aborted);
      break;
    }
    const BallKernel k(dim, x, hit.distance, sigma_bar);
    const double norm = k.green_norm();

    // Source term S = f(y) |G| / sqrt(alpha(x) alpha(y)).
    const Vec3 y = sample_green_point(k, sampler, p.radial_tolerance);
    const double alpha_y = p.alpha.eval(y);
    if (!(alpha_y > 0.0)) throw NonpositiveAlpha("alpha <= 0 inside the domain");
    const double f = p.source.eval(y);
    const double root = std::sqrt(alpha_x * alpha_y);
    const double contribution = beta * (f * norm / root);
    const double d = delta * beta;
    p.source.backward(g.source, y, d * norm / root);
    const double ds = d * (f * norm / root);
    p.alpha.backward(g.alpha, x, -0.5 * ds / alpha_x);
    p.alpha.backward(g.alpha, y, -0.5 * ds / alpha_y);
    u_rem -= contribution;
    magnitude += std::abs(contribution);

    // Throughput factor mu; its gradient is weighted by the tail u_rem over
    // the detached mu.
    double mu;
    double alpha_next;
    Vec3 next;
    if (sampler.next_uniform() < norm * sigma_bar) {
      next = sample_green_point(k, sampler, p.radial_tolerance);
      const FieldSample an = p.alpha.eval_derivatives(next);
      if (!(an.value > 0.0)) throw NonpositiveAlpha("alpha <= 0 inside the domain");
      alpha_next = an.value;
      const double sigma_next = p.sigma.eval(next);
      const double sp = sigma_prime_of(sigma_next, an);
      const double ratio = std::sqrt(alpha_next / alpha_x);
      const double weight = (sigma_bar - sp) / sigma_bar;
      mu = weight * ratio;
      if (mu != 0.0) {
        const double c = delta * u_rem / mu;
        const double c_sp = -c * ratio / sigma_bar;  // adjoint of sigma'(next)
        const double c_ratio = c * weight * ratio * 0.5;
        const double inv = 1.0 / alpha_next;
        const double inv2 = inv * inv;
        const double grad2 = an.dx * an.dx + an.dy * an.dy;
        p.sigma.backward(g.sigma, next, c_sp * inv);
        FieldSample adj;
        adj.value = c_sp * (-sigma_next * inv2 - 0.5 * an.laplacian * inv2 + 0.5 * grad2 * inv2 * inv) + c_ratio * inv;
        adj.dx = c_sp * (-0.5 * an.dx * inv2);
        adj.dy = c_sp * (-0.5 * an.dy * inv2);
        adj.laplacian = c_sp * 0.5 * inv;
        p.alpha.backward(g.alpha, next, adj);
        p.alpha.backward(g.alpha, x, -c_ratio / alpha_x);
      }
      if (trace) trace->events.push_back(WalkEvent::Volume);
    } else {
      next = sample_sphere_point(k, sampler);
      alpha_next = p.alpha.eval(next);
      if (!(alpha_next > 0.0)) throw NonpositiveAlpha("alpha <= 0 inside the domain");
      mu = std::sqrt(alpha_next / alpha_x);
      const double c_ratio = (delta * u_rem / mu) * mu * 0.5;
      p.alpha.backward(g.alpha, next, c_ratio / alpha_next);
      p.alpha.backward(g.alpha, x, -c_ratio / alpha_x);
      if (trace) trace->events.push_back(WalkEvent::Surface);
    }
    beta *= mu;
    x = next;
    alpha_x = alpha_next;
    if (beta == 0.0) {
      if (trace) {
        trace->vertices.push_back(x);
        trace->events.push_back(WalkEvent::Absorbed);
      }
      break;
    }
  }
  check_residual(a.u_primal, u_rem, magnitude);
}

void grad_walk(const PDEProblem& p, const AdjointInput& a, ParamGradients& g, WalkTrace* trace) {
  switch (p.kind) {
    case PdeKind::Poisson:
      return grad_poisson(p, a, g, trace);
    case PdeKind::ScreenedPoisson:
      return grad_screened(p, a, g, trace);
    case PdeKind::Elliptic:
      return grad_elliptic(p, a, g, trace);
  }
  throw ConfigError("unknown PDE kind");
}

ParamGradients run_adjoint_pass(const PDEProblem& p, std::span<const Vec3> points, const PrimalPass& primal,
                                std::span<const double> delta_u, std::uint64_t seed, std::size_t threads) {
  const std::size_t n_walks = primal.n_walks;
  if (delta_u.size() != points.size()) throw LengthMismatch("delta_u and points differ in length");
  if (primal.walk_values.size() != points.size() * n_walks) {
    throw LengthMismatch("primal pass did not keep per-walk values for these points");
  }
  constexpr std::size_t kBlocks = 64;
  const std::size_t blocks = std::max<std::size_t>(1, std::min(kBlocks, points.size()));
  std::vector<ParamGradients> partial(blocks, make_gradients(p));
  detail::parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t begin = b * points.size() / blocks;
    const std::size_t end = (b + 1) * points.size() / blocks;
    for (std::size_t i = begin; i < end; ++i) {
      if (delta_u[i] == 0.0) continue;
      for (std::size_t j = 0; j < n_walks; ++j) {
        AdjointInput in;
        in.x0 = points[i];
        in.u_primal = primal.walk_values[i * n_walks + j];
        in.delta_u = delta_u[i];
        in.seed = walk_seed(seed, i, n_walks, j);
        grad_walk(p, in, partial[b]);
      }
    }
  });
  for (std::size_t stride = 1; stride < blocks; stride *= 2) {
    for (std::size_t b = 0; b + stride < blocks; b += 2 * stride) partial[b] += partial[b + stride];
  }
  ParamGradients out = std::move(partial[0]);
  if (n_walks > 0) out.scale(1.0 / static_cast<double>(n_walks));
  return out;
}

LossGradient loss_gradient(const PDEProblem& p, const LossSpec& loss, std::size_t n_walks, std::uint64_t seed,
                           std::size_t threads) {
  PassOptions opt;
  opt.threads = threads;
  opt.keep_walk_values = true;
  LossGradient out;
  out.primal = run_primal_pass(p, loss.points, n_walks, seed, opt);
  const LossResult lr = loss_and_delta(out.primal.estimates, loss.reference);
  out.loss = lr.loss;
  out.gradients = run_adjoint_pass(p, loss.points, out.primal, lr.delta_u, seed, threads);
  return out;
}

namespace {

Field& field_of(PDEProblem& p, ParamField f) {
  switch (f) {
    case ParamField::Source:
      return p.source;
    case ParamField::Sigma:
      return p.sigma;
    case ParamField::Alpha:
      return p.alpha;
    case ParamField::Boundary:
      if (!p.boundary.differentiable()) throw ShapeMismatch("boundary condition has no parameters");
      return p.boundary.field();
  }
  throw ShapeMismatch("unknown parameter field");
}

}  // namespace

double& parameter(PDEProblem& p, const ParamRef& ref) {
  Field& f = field_of(p, ref.field);
  if (ref.texel) {
    if (f.is_constant()) throw ShapeMismatch("texel reference into a constant field");
    if (*ref.texel >= f.tex().size()) throw ShapeMismatch("texel index out of range");
    return f.tex().values()[*ref.texel];
  }
  if (!f.is_constant()) throw ShapeMismatch("scalar reference into a texture field");
  return f.constant_ref();
}

const FieldGradient& gradient_slot(const ParamGradients& g, ParamField field) {
  switch (field) {
    case ParamField::Source:
      return g.source;
    case ParamField::Sigma:
      return g.sigma;
    case ParamField::Alpha:
      return g.alpha;
    case ParamField::Boundary:
      return g.boundary;
  }
  throw ShapeMismatch("unknown parameter field");
}

double gradient_value(const ParamGradients& g, const ParamRef& ref) {
  const FieldGradient& slot = gradient_slot(g, ref.field);
  if (ref.texel) return slot.texels[*ref.texel];
  return slot.scalar;
}

double central_difference(const std::function<double(double)>& f, double theta, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  return (f(theta + h) - f(theta - h)) / (2.0 * h);
}

double fd_oracle(const PDEProblem& p, const LossSpec& loss, const ParamRef& ref, double h, std::size_t n_walks,
                 std::uint64_t seed, std::size_t threads) {
  PDEProblem work = p;
  double& theta = parameter(work, ref);
  const double theta0 = theta;
  auto eval = [&](double value) {
    theta = value;
    const auto est = estimate_solution(work, loss.points, n_walks, seed, threads);
    return loss_and_delta(est, loss.reference).loss;
  };
  return central_difference(eval, theta0, h);
}

}  // namespace dwos
