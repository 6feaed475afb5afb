#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dwos/adjoint.hpp"
#include "dwos/loss.hpp"
#include "dwos/problem.hpp"

namespace dwos {

enum class OptimizerMethod { Adam, GradientDescent };

const char* to_string(OptimizerMethod m);
const char* to_string(ParamField f);

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::Adam;
  double step_size = 2e-2;
  int iterations = 100;
  std::size_t walks = 256;
  std::vector<ParamField> parameters{ParamField::Source};
  /// Optimize sigma and alpha through softplus so they stay positive.
  bool positivity = true;
  /// Recompute sigma_bar from the current coefficients every iteration.
  bool auto_sigma_bar = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Snapshot callback period; 0 only snapshots the final state.
  int snapshot_every = 0;
  std::size_t threads = 1;

  /// Throws ConfigError on a nonpositive step size, zero iterations or walks.
  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// One Adam update with bias correction. The state is sized on first use;
/// mismatched spans or state throw ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double step_size,
               double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

double softplus(double x);
double inverse_softplus(double y);
double sigmoid(double x);

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_rms = 0.0;
  double sigma_bar = 0.0;
};

struct OptimizeResult {
  std::vector<IterationRecord> history;
  PDEProblem problem;
};

/// Called with the problem after `iteration` updates and the gradients of
/// the last pass (empty gradients for iteration 0).
using SnapshotFn = std::function<void(int iteration, const PDEProblem& p, const ParamGradients& g)>;

/// Iteration k runs a primal pass with seed derive_seed(seed, k), the loss,
/// the paired adjoint pass and an update of the selected parameters.
OptimizeResult optimize(PDEProblem p, const LossSpec& loss, const OptimizerConfig& cfg, std::uint64_t seed,
                        const SnapshotFn& snapshot = {});

/// RMS of the gradient entries belonging to the listed fields.
double gradient_rms(const ParamGradients& g, const PDEProblem& p, std::span<const ParamField> fields);

/// Kept lattice points and their pixel index j * nx + i.
struct Lattice {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<Vec3> points;
  std::vector<std::size_t> pixels;
};

/// Regular nx x ny lattice of cell centres over the domain bounds (z = 0
/// slice in 3D), keeping points that are inside and farther than `margin`
/// from the boundary.
Lattice measurement_lattice(const Domain& d, std::size_t nx, std::size_t ny, double margin);
std::vector<Vec3> measurement_grid(const Domain& d, std::size_t nx, std::size_t ny, double margin);

/// Per-point means from the reference solver.
std::vector<double> reference_values(const PDEProblem& p, std::span<const Vec3> points, std::size_t n_walks,
                                     std::uint64_t seed, std::size_t threads = 1);

/// Unit disk with a round and a rectangular obstacle.
Domain disk_with_obstacles();

enum class ExperimentKind { Source, Screening, Diffusion };

const char* to_string(ExperimentKind k);

struct ExperimentScale {
  std::size_t grid = 64;
  std::size_t texture = 16;
  std::size_t walks = 256;
  std::size_t reference_walks = 2560;
  int iterations = 100;
};

struct Experiment {
  PDEProblem reference;
  PDEProblem initial;
  LossSpec loss;
  OptimizerConfig optimizer;
};

/// Problems, measurement points and optimizer settings of an experiment,
/// without reference values.
Experiment experiment_setup(ExperimentKind kind, const ExperimentScale& scale);

/// Seed stream of reference solves, independent of the iteration seeds.
std::uint64_t reference_seed(std::uint64_t seed);

/// Synthetic inverse problem: the reference values come from `reference`
/// solved with reference_walks and reference_seed(seed).
Experiment make_experiment(ExperimentKind kind, const ExperimentScale& scale, std::uint64_t seed,
                           std::size_t threads = 1);

/// Reference coefficient textures of the three experiments.
GridTexture reference_source(std::size_t n);
GridTexture reference_sigma(std::size_t n);
GridTexture reference_alpha(std::size_t n);

}  // namespace dwos

namespace dwos {

/// Adjoint-vs-finite-difference comparison over batches with common random
/// numbers: batch b uses seed derive_seed(seed, b) for both estimates.
struct GradCheckOptions {
  std::vector<ParamField> fields{ParamField::Source};
  std::size_t walks = 4096;
  std::size_t batches = 8;
  /// Central difference step, relative to max(1, |theta|).
  double fd_step = 1e-3;
  /// Texels with |gradient| above this fraction of the field's max are scored.
  double select_fraction = 0.1;
  /// Finite-difference every texel instead of only the scored ones.
  bool fd_all = false;
  std::size_t threads = 1;
  /// Relative error tolerance per field; 0 selects the default (5% for alpha,
  /// 2% otherwise).
  double tolerance = 0.0;
};

struct GradCheckRow {
  ParamField field = ParamField::Source;
  /// Texel index, or -1 for a scalar parameter.
  long texel = -1;
  double adjoint = 0.0;
  double adjoint_se = 0.0;
  double fd = 0.0;
  double fd_se = 0.0;
  /// Standard error of the paired per-batch difference adjoint - fd.
  double diff_se = 0.0;
  bool selected = false;
  bool evaluated = false;
  double rel_err = 0.0;
};

struct GradCheckSummary {
  ParamField field = ParamField::Source;
  std::size_t selected = 0;
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  /// Largest adjoint standard error relative to |gradient| over scored texels.
  double max_rel_se = 0.0;
  /// Largest paired-difference standard error relative to |fd|.
  double max_rel_diff_se = 0.0;
  bool pass = false;
};

struct GradCheckResult {
  double loss = 0.0;
  std::vector<GradCheckRow> rows;
  std::vector<GradCheckSummary> summaries;
  bool pass = false;
};

double default_gradcheck_tolerance(ParamField f);

GradCheckResult check_gradients(const PDEProblem& p, const LossSpec& loss, const GradCheckOptions& opt,
                                std::uint64_t seed);

}  // namespace dwos
