#include "dwos/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dwos/errors.hpp"
#include "dwos/parallel.hpp"

namespace dwos {

const char* to_string(PdeKind kind) {
  switch (kind) {
    case PdeKind::Poisson:
      return "poisson";
    case PdeKind::ScreenedPoisson:
      return "screened";
    case PdeKind::Elliptic:
      return "elliptic";
  }
  return "unknown";
}

namespace {

template <class Fn>
void for_each_probe(const Domain& d, std::size_t n, Fn&& fn) {
  const Bounds b = d.bounds();
  const std::size_t nz = d.dimension() == 3 ? n : 1;
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x{b.lo.x + (i + 0.5) / n * (b.hi.x - b.lo.x), b.lo.y + (j + 0.5) / n * (b.hi.y - b.lo.y),
                     d.dimension() == 3 ? b.lo.z + (k + 0.5) / n * (b.hi.z - b.lo.z) : 0.0};
        if (d.contains(x)) fn(x);
      }
    }
  }
}

double sigma_prime_from(double sigma, const FieldSample& a) {
  const double inv = 1.0 / a.value;
  const double grad_log2 = (a.dx * a.dx + a.dy * a.dy) * inv * inv;
  return sigma * inv + 0.5 * (a.laplacian * inv - 0.5 * grad_log2);
}

}  // namespace

void PDEProblem::validate() const {
  eps.validate(domain);
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (!(radial_tolerance > 0.0)) throw ConfigError("radial_tolerance must be positive");
  if (kind == PdeKind::ScreenedPoisson) {
    if (!sigma.is_constant()) throw ConfigError("screened Poisson needs a scalar sigma");
    if (!(sigma.constant_value() >= 0.0)) throw ConfigError("sigma must be non-negative");
  }
  if (kind == PdeKind::Elliptic) {
    if (!(sigma_bar > 0.0)) throw ConfigError("sigma_bar must be positive for the elliptic solver");
    for_each_probe(domain, 64, [&](const Vec3& x) {
      if (!(alpha.eval(x) > 0.0)) throw NonpositiveAlpha("alpha must be positive inside the domain");
    });
  }
}

double sigma_prime(const PDEProblem& p, const Vec3& x) {
  const FieldSample a = p.alpha.eval_derivatives(x);
  if (!(a.value > 0.0)) throw NonpositiveAlpha("alpha(x) <= 0 in sigma_prime");
  return sigma_prime_from(p.sigma.eval(x), a);
}

double default_sigma_bar(const PDEProblem& p, std::size_t probes_per_axis) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_probe(p.domain, probes_per_axis, [&](const Vec3& x) { best = std::max(best, sigma_prime(p, x)); });
  const double diam = p.domain.diameter();
  return std::max(1.5 * best, 1.0 / (diam * diam));
}

namespace {

// Walk shared by the Poisson and screened solvers. For sigma = 0 the kernel
// takes its harmonic branch, where throughput() is exactly 1.
WalkResult screened_walk(const PDEProblem& p, const Vec3& x0, PathSeed seed, double sigma, WalkTrace* trace) {
  Sampler sampler(seed);
  const int dim = p.domain.dimension();
  Vec3 x = x0;
  double beta = 1.0;
  double u = 0.0;
  for (int step = 0;; ++step) {
    const BoundaryHit hit = p.domain.query(x);
    if (trace) trace->vertices.push_back(x);
    if (hit.distance < p.eps.epsilon) {
      u += beta * p.boundary.eval(hit);
      if (trace) trace->events.push_back(WalkEvent::Boundary);
      return {u, step, false};
    }
    if (step >= p.max_steps) {
      if (trace) trace->events.push_back(WalkEvent::Aborted);
      return {u, step, true};
    }
    const BallKernel k(dim, x, hit.distance, sigma);
    const Vec3 y = sample_green_point(k, sampler, p.radial_tolerance);
    u += beta * (p.source.eval(y) * k.green_norm());
    x = sample_sphere_point(k, sampler);
    beta *= k.throughput();
    if (trace) trace->events.push_back(WalkEvent::Surface);
  }
}

}  // namespace

WalkResult solve_poisson(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace) {
  return screened_walk(p, x0, seed, 0.0, trace);
}

WalkResult solve_screened(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace) {
  if (!p.sigma.is_constant()) throw ConfigError("solve_screened needs a scalar sigma");
  return screened_walk(p, x0, seed, p.sigma.constant_value(), trace);
}

WalkResult solve_elliptic(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace) {
  if (!(p.sigma_bar > 0.0)) throw ConfigError("solve_elliptic needs sigma_bar > 0");
  Sampler sampler(seed);
  const int dim = p.domain.dimension();
  const double sigma_bar = p.sigma_bar;
  Vec3 x = x0;
  double alpha_x = p.alpha.eval(x);
  if (!(alpha_x > 0.0)) throw NonpositiveAlpha("alpha <= 0 at walk start");
  double beta = 1.0;
  double u = 0.0;
  for (int step = 0;; ++step) {
    const BoundaryHit hit = p.domain.query(x);
    if (trace) trace->vertices.push_back(x);
    if (hit.distance < p.eps.epsilon) {
      u += beta * p.boundary.eval(hit);
      if (trace) trace->events.push_back(WalkEvent::Boundary);
      return {u, step, false};
    }
    if (step >= p.max_steps) {
      if (trace) trace->events.push_back(WalkEvent::Aborted);
      return {u, step, true};
    }
    const BallKernel k(dim, x, hit.distance, sigma_bar);
    const double norm = k.green_norm();

    // source term
    const Vec3 y = sample_green_point(k, sampler, p.radial_tolerance);
    const double alpha_y = p.alpha.eval(y);
    if (!(alpha_y > 0.0)) throw NonpositiveAlpha("alpha <= 0 inside the domain");
    u += beta * (p.source.eval(y) * norm / std::sqrt(alpha_x * alpha_y));

    // volume or surface recursion, chosen with probability |G| sigma_bar
    double mu;
    double alpha_next;
    Vec3 next;
    if (sampler.next_uniform() < norm * sigma_bar) {
      next = sample_green_point(k, sampler, p.radial_tolerance);
      const FieldSample a = p.alpha.eval_derivatives(next);
      if (!(a.value > 0.0)) throw NonpositiveAlpha("alpha <= 0 inside the domain");
      alpha_next = a.value;
      const double sp = sigma_prime_from(p.sigma.eval(next), a);
      mu = ((sigma_bar - sp) / sigma_bar) * std::sqrt(alpha_next / alpha_x);
      if (trace) trace->events.push_back(WalkEvent::Volume);
    } else {
      next = sample_sphere_point(k, sampler);
      alpha_next = p.alpha.eval(next);
      if (!(alpha_next > 0.0)) throw NonpositiveAlpha("alpha <= 0 inside the domain");
      mu = std::sqrt(alpha_next / alpha_x);
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
      return {u, step + 1, false};
    }
  }
}

WalkResult solve_walk(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace) {
  switch (p.kind) {
    case PdeKind::Poisson:
      return solve_poisson(p, x0, seed, trace);
    case PdeKind::ScreenedPoisson:
      return solve_screened(p, x0, seed, trace);
    case PdeKind::Elliptic:
      return solve_elliptic(p, x0, seed, trace);
  }
  throw ConfigError("unknown PDE kind");
}

double Estimate::standard_error() const { return std::sqrt(variance_of_mean); }

void RunningStats::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

RunningStats& RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return *this;
  if (n_ == 0) return *this = o;
  const double n = static_cast<double>(n_ + o.n_);
  const double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
  return *this;
}

double RunningStats::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

Estimate RunningStats::estimate() const {
  return Estimate{mean_, n_ > 0 ? variance() / static_cast<double>(n_) : 0.0, n_};
}

double PrimalPass::mean_steps() const {
  return total_walks ? static_cast<double>(total_steps) / static_cast<double>(total_walks) : 0.0;
}

PrimalPass run_primal_pass(const PDEProblem& p, std::span<const Vec3> points, std::size_t n_walks,
                           std::uint64_t seed, const PassOptions& options) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!p.domain.contains(points[i])) {
      throw ExteriorPoint("measurement point " + std::to_string(i) + " lies outside the domain");
    }
  }
  PrimalPass out;
  out.n_walks = n_walks;
  out.estimates.resize(points.size());
  if (options.keep_walk_values) out.walk_values.assign(points.size() * n_walks, 0.0);
  std::vector<std::size_t> aborted(points.size(), 0);
  std::vector<std::uint64_t> steps(points.size(), 0);
  detail::parallel_for(points.size(), options.threads, [&](std::size_t i) {
    RunningStats stats;
    for (std::size_t j = 0; j < n_walks; ++j) {
      const WalkResult w = solve_walk(p, points[i], walk_seed(seed, i, n_walks, j));
      stats.add(w.value);
      steps[i] += static_cast<std::uint64_t>(w.steps);
      if (w.aborted) ++aborted[i];
      if (options.keep_walk_values) out.walk_values[i * n_walks + j] = w.value;
    }
    out.estimates[i] = stats.estimate();
  });
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.aborted_walks += aborted[i];
    out.total_steps += steps[i];
  }
  out.total_walks = points.size() * n_walks;
  if (out.total_walks > 0 &&
      static_cast<double>(out.aborted_walks) > options.max_abort_fraction * static_cast<double>(out.total_walks)) {
    throw MaxStepsExceeded(std::to_string(out.aborted_walks) + " of " + std::to_string(out.total_walks) +
                           " walks hit max_steps");
  }
  return out;
}

std::vector<Estimate> estimate_solution(const PDEProblem& p, std::span<const Vec3> points, std::size_t n_walks,
                                        std::uint64_t seed, std::size_t threads) {
  PassOptions opt;
  opt.threads = threads;
  return run_primal_pass(p, points, n_walks, seed, opt).estimates;
}

}  // namespace dwos
