#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dwos/problem.hpp"
#include "dwos/rng.hpp"

namespace dwos {

/// What ended a walk step, recorded by WalkTrace.
enum class WalkEvent : std::uint8_t {
  Surface,   ///< next vertex sampled on the sphere
  Volume,    ///< next vertex sampled inside the ball (delta tracking)
  Boundary,  ///< reached the epsilon shell
  Absorbed,  ///< throughput became exactly zero
  Aborted,   ///< step cap reached
};

/// Instrumented record of one walk, for replay checks and debugging.
/// Recording allocates; pass nullptr in production passes.
struct WalkTrace {
  std::vector<Vec3> vertices;
  std::vector<WalkEvent> events;

  void clear() {
    vertices.clear();
    events.clear();
  }
};

struct WalkResult {
  double value = 0.0;
  int steps = 0;
  bool aborted = false;
};

/// Walk on spheres for the Poisson equation. sigma is ignored.
WalkResult solve_poisson(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace = nullptr);
/// Walk on spheres for the screened Poisson equation with constant sigma.
WalkResult solve_screened(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace = nullptr);
/// Delta-tracking walk on spheres for div(alpha grad u) - sigma u = -f.
WalkResult solve_elliptic(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace = nullptr);
/// Dispatches on p.kind.
WalkResult solve_walk(const PDEProblem& p, const Vec3& x0, PathSeed seed, WalkTrace* trace = nullptr);

/// Monte Carlo mean with the variance of the mean.
struct Estimate {
  double mean = 0.0;
  double variance_of_mean = 0.0;
  std::size_t n_walks = 0;

  double standard_error() const;
};

/// Welford accumulator.
class RunningStats {
 public:
  void add(double x);
  RunningStats& merge(const RunningStats& other);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;
  Estimate estimate() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Seed of walk j at measurement point i.
inline PathSeed walk_seed(std::uint64_t seed, std::size_t point, std::size_t n_walks, std::size_t j) {
  return PathSeed{seed, static_cast<std::uint64_t>(point) * n_walks + j};
}

struct PassOptions {
  std::size_t threads = 1;
  /// Keep every per-walk value (needed by the adjoint pass).
  bool keep_walk_values = false;
  /// Above this fraction of aborted walks the pass throws MaxStepsExceeded.
  double max_abort_fraction = 1e-4;
};

struct PrimalPass {
  std::vector<Estimate> estimates;
  /// point-major, n_walks per point; empty unless keep_walk_values.
  std::vector<double> walk_values;
  std::size_t n_walks = 0;
  std::size_t aborted_walks = 0;
  std::size_t total_walks = 0;
  std::uint64_t total_steps = 0;

  double mean_steps() const;
};

/// Runs n_walks walks per point. Walk j at point i uses walk_seed(seed, i,
/// n_walks, j), so results do not depend on the thread count.
PrimalPass run_primal_pass(const PDEProblem& p, std::span<const Vec3> points, std::size_t n_walks,
                           std::uint64_t seed, const PassOptions& options = {});

std::vector<Estimate> estimate_solution(const PDEProblem& p, std::span<const Vec3> points, std::size_t n_walks,
                                        std::uint64_t seed, std::size_t threads = 1);

}  // namespace dwos
