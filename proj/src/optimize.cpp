#include "dwos/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "dwos/errors.hpp"

namespace dwos {

LossResult loss_and_delta(std::span<const double> u, std::span<const double> reference) {
  if (u.size() != reference.size()) {
    throw LengthMismatch("loss: " + std::to_string(u.size()) + " estimates vs " + std::to_string(reference.size()) +
                         " reference values");
  }
  LossResult r;
  r.delta_u.resize(u.size());
  if (u.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - reference[i];
    r.loss += d * d;
    r.delta_u[i] = 2.0 * d * inv_n;
  }
  r.loss *= inv_n;
  return r;
}

LossResult loss_and_delta(std::span<const Estimate> estimates, std::span<const double> reference) {
  std::vector<double> u(estimates.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = estimates[i].mean;
  return loss_and_delta(std::span<const double>(u), reference);
}

const char* to_string(OptimizerMethod m) { return m == OptimizerMethod::Adam ? "adam" : "gradient_descent"; }

const char* to_string(ParamField f) {
  switch (f) {
    case ParamField::Source:
      return "source";
    case ParamField::Sigma:
      return "sigma";
    case ParamField::Alpha:
      return "alpha";
    case ParamField::Boundary:
      return "boundary";
  }
  return "?";
}

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Source:
      return "source";
    case ExperimentKind::Screening:
      return "screening";
    case ExperimentKind::Diffusion:
      return "diffusion";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ConfigError("optimizer.step_size must be > 0 (got " + std::to_string(step_size) + ")");
  }
  if (iterations < 1) throw ConfigError("optimizer.iterations must be >= 1");
  if (walks < 1) throw ConfigError("optimizer.walks must be >= 1");
  if (parameters.empty()) throw ConfigError("optimizer.parameters must name at least one field");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer.beta1 and optimizer.beta2 must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("optimizer.adam_epsilon must be > 0");
  if (snapshot_every < 0) throw ConfigError("optimizer.snapshot_every must be >= 0");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double step_size,
               double beta1, double beta2, double epsilon) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_step: parameter and gradient sizes differ");
  if (state.t == 0 && state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeMismatch("adam_step: optimizer state does not match the parameter count");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= step_size * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw DomainError("inverse_softplus needs a positive argument");
  return y + std::log(-std::expm1(-y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

const Field& field_ref(const PDEProblem& p, ParamField f) {
  switch (f) {
    case ParamField::Source:
      return p.source;
    case ParamField::Sigma:
      return p.sigma;
    case ParamField::Alpha:
      return p.alpha;
    case ParamField::Boundary:
      if (!p.boundary.differentiable()) throw ConfigError("boundary condition kind has no parameters");
      return p.boundary.field();
  }
  throw ConfigError("unknown parameter field");
}

Field& field_ref(PDEProblem& p, ParamField f) { return const_cast<Field&>(field_ref(std::as_const(p), f)); }

std::span<double> field_values(Field& f) {
  if (f.is_constant()) return std::span<double>(&f.constant_ref(), 1);
  return f.tex().values();
}

std::span<const double> gradient_values(const FieldGradient& g, const Field& f) {
  if (f.is_constant()) return std::span<const double>(&g.scalar, 1);
  return g.texels.values();
}

bool positive_field(ParamField f) { return f == ParamField::Sigma || f == ParamField::Alpha; }

// Smallest value a positive coefficient is clamped to before the softplus
// inverse, so that a zero initial sigma maps to a finite latent value.
constexpr double kPositiveFloor = 1e-6;

}  // namespace

double gradient_rms(const ParamGradients& g, const PDEProblem& p, std::span<const ParamField> fields) {
  double sum = 0.0;
  std::size_t n = 0;
  for (ParamField f : fields) {
    for (double v : gradient_values(gradient_slot(g, f), field_ref(p, f))) {
      sum += v * v;
      ++n;
    }
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

OptimizeResult optimize(PDEProblem p, const LossSpec& loss, const OptimizerConfig& cfg, std::uint64_t seed,
                        const SnapshotFn& snapshot) {
  cfg.validate();
  if (loss.points.size() != loss.reference.size()) throw LengthMismatch("loss points and reference differ in length");

  // Latent parameter vector: raw values, or softplus^-1 for positive fields.
  struct Block {
    ParamField field;
    std::size_t offset;
    std::size_t size;
    bool mapped;
  };
  std::vector<Block> blocks;
  std::vector<double> latent;
  for (ParamField f : cfg.parameters) {
    std::span<double> values = field_values(field_ref(p, f));
    const bool mapped = cfg.positivity && positive_field(f);
    blocks.push_back({f, latent.size(), values.size(), mapped});
    for (double& v : values) {
      if (mapped) {
        v = std::max(v, kPositiveFloor);
        latent.push_back(inverse_softplus(v));
      } else {
        latent.push_back(v);
      }
    }
  }

  OptimizeResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));
  AdamState state;
  std::vector<double> grad(latent.size());
  if (snapshot) snapshot(0, p, make_gradients(p));

  for (int it = 0; it < cfg.iterations; ++it) {
    if (cfg.auto_sigma_bar && p.kind == PdeKind::Elliptic) p.sigma_bar = default_sigma_bar(p);
    const LossGradient lg = loss_gradient(p, loss, cfg.walks, derive_seed(seed, static_cast<std::uint64_t>(it)),
                                          cfg.threads);
    IterationRecord rec;
    rec.iteration = it;
    rec.loss = lg.loss;
    rec.grad_rms = gradient_rms(lg.gradients, p, cfg.parameters);
    rec.sigma_bar = p.sigma_bar;
    result.history.push_back(rec);

    for (const Block& b : blocks) {
      std::span<const double> g = gradient_values(gradient_slot(lg.gradients, b.field), field_ref(p, b.field));
      for (std::size_t k = 0; k < b.size; ++k) {
        grad[b.offset + k] = b.mapped ? g[k] * sigmoid(latent[b.offset + k]) : g[k];
      }
    }
    if (cfg.method == OptimizerMethod::Adam) {
      adam_step(latent, grad, state, cfg.step_size, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
    } else {
      for (std::size_t k = 0; k < latent.size(); ++k) latent[k] -= cfg.step_size * grad[k];
    }
    for (const Block& b : blocks) {
      std::span<double> values = field_values(field_ref(p, b.field));
      for (std::size_t k = 0; k < b.size; ++k) {
        const double z = latent[b.offset + k];
        values[k] = b.mapped ? softplus(z) : z;
      }
    }

    const int done = it + 1;
    if (snapshot && ((cfg.snapshot_every > 0 && done % cfg.snapshot_every == 0) || done == cfg.iterations)) {
      snapshot(done, p, lg.gradients);
    }
  }
  result.problem = std::move(p);
  return result;
}

Lattice measurement_lattice(const Domain& d, std::size_t nx, std::size_t ny, double margin) {
  const Bounds b = d.bounds();
  Lattice l;
  l.nx = nx;
  l.ny = ny;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const Vec3 x{b.lo.x + (b.hi.x - b.lo.x) * (static_cast<double>(i) + 0.5) / static_cast<double>(nx),
                   b.lo.y + (b.hi.y - b.lo.y) * (static_cast<double>(j) + 0.5) / static_cast<double>(ny), 0.0};
      if (d.contains(x) && d.distance_to_boundary(x) > margin) {
        l.points.push_back(x);
        l.pixels.push_back(j * nx + i);
      }
    }
  }
  return l;
}

std::vector<Vec3> measurement_grid(const Domain& d, std::size_t nx, std::size_t ny, double margin) {
  return measurement_lattice(d, nx, ny, margin).points;
}

std::vector<double> reference_values(const PDEProblem& p, std::span<const Vec3> points, std::size_t n_walks,
                                     std::uint64_t seed, std::size_t threads) {
  const auto est = estimate_solution(p, points, n_walks, seed, threads);
  std::vector<double> out(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) out[i] = est[i].mean;
  return out;
}

Domain disk_with_obstacles() {
  return Domain(2, {Ball{Vec3{}, 1.0, Side::Inside}, Ball{Vec3{0.35, 0.3, 0.0}, 0.2, Side::Outside},
                    Box{Vec3{-0.55, -0.45, 0.0}, Vec3{-0.2, -0.3, 0.0}, Side::Outside}});
}

namespace {

const Extent kUnitExtent{-1.0, -1.0, 1.0, 1.0};

double bump(const Vec3& x, double cx, double cy, double w) {
  const double dx = x.x - cx;
  const double dy = x.y - cy;
  return std::exp(-(dx * dx + dy * dy) / (w * w));
}

}  // namespace

GridTexture reference_source(std::size_t n) {
  return texture_from_function(n, n, kUnitExtent, [](const Vec3& x) {
    return 2.0 + 6.0 * bump(x, -0.35, 0.3, 0.3) + 4.0 * bump(x, 0.3, -0.4, 0.25);
  });
}

GridTexture reference_sigma(std::size_t n) {
  return texture_from_function(n, n, kUnitExtent, [](const Vec3& x) {
    return 1.0 + 12.0 * bump(x, -0.3, 0.25, 0.35) + 6.0 * bump(x, 0.4, -0.35, 0.3);
  });
}

GridTexture reference_alpha(std::size_t n) {
  return texture_from_function(n, n, kUnitExtent, [](const Vec3& x) {
    return 1.0 + 0.8 * bump(x, -0.3, 0.2, 0.4) - 0.4 * bump(x, 0.35, -0.35, 0.3);
  });
}

Experiment experiment_setup(ExperimentKind kind, const ExperimentScale& scale) {
  Experiment e;
  PDEProblem base;
  base.kind = PdeKind::Elliptic;
  base.domain = disk_with_obstacles();
  base.boundary = BoundaryCondition::constant(0.0);
  base.eps = EpsilonShell{2e-3};
  base.source = Field::constant(8.0);
  base.sigma = Field::constant(1.0);
  base.alpha = Field::constant(1.0);
  const std::size_t n = scale.texture;
  OptimizerConfig& opt = e.optimizer;
  opt.iterations = scale.iterations;
  opt.walks = scale.walks;

  e.reference = base;
  e.initial = base;
  switch (kind) {
    case ExperimentKind::Source:
      e.reference.source = Field::texture(reference_source(n));
      e.initial.source = Field::texture(GridTexture(n, n, kUnitExtent, 2.0));
      opt.parameters = {ParamField::Source};
      opt.step_size = 0.2;
      break;
    case ExperimentKind::Screening:
      e.reference.sigma = Field::texture(reference_sigma(n));
      e.initial.sigma = Field::texture(GridTexture(n, n, kUnitExtent, 1.0));
      opt.parameters = {ParamField::Sigma};
      opt.step_size = 5e-2;
      break;
    case ExperimentKind::Diffusion:
      e.reference.alpha = Field::texture(reference_alpha(n));
      e.initial.alpha = Field::texture(GridTexture(n, n, kUnitExtent, 1.0));
      opt.parameters = {ParamField::Alpha};
      opt.step_size = 2e-2;
      break;
  }
  e.reference.sigma_bar = default_sigma_bar(e.reference);
  e.initial.sigma_bar = default_sigma_bar(e.initial);

  e.loss.points = measurement_grid(e.reference.domain, scale.grid, scale.grid, 2.0 * e.reference.eps.epsilon);
  return e;
}

std::uint64_t reference_seed(std::uint64_t seed) { return derive_seed(seed, 0x5EFE5E4CEULL); }

Experiment make_experiment(ExperimentKind kind, const ExperimentScale& scale, std::uint64_t seed,
                           std::size_t threads) {
  Experiment e = experiment_setup(kind, scale);
  e.optimizer.threads = threads;
  e.loss.reference = reference_values(e.reference, e.loss.points, scale.reference_walks, reference_seed(seed), threads);
  return e;
}

}  // namespace dwos

namespace dwos {

double default_gradcheck_tolerance(ParamField f) { return f == ParamField::Alpha ? 0.05 : 0.02; }

namespace {

struct BatchStats {
  std::vector<double> sum;
  std::vector<double> sum2;
  explicit BatchStats(std::size_t n) : sum(n, 0.0), sum2(n, 0.0) {}
  void add(std::size_t k, double v) {
    sum[k] += v;
    sum2[k] += v * v;
  }
  double mean(std::size_t k, std::size_t b) const { return sum[k] / static_cast<double>(b); }
  double se(std::size_t k, std::size_t b) const {
    if (b < 2) return 0.0;
    const double m = mean(k, b);
    const double var = std::max(0.0, (sum2[k] - static_cast<double>(b) * m * m) / static_cast<double>(b - 1));
    return std::sqrt(var / static_cast<double>(b));
  }
};

}  // namespace

GradCheckResult check_gradients(const PDEProblem& p, const LossSpec& loss, const GradCheckOptions& opt,
                                std::uint64_t seed) {
  if (opt.batches < 1 || opt.walks < opt.batches) throw ConfigError("validate: walks must be >= batches >= 1");
  if (!(opt.fd_step > 0.0)) throw ConfigError("validate.fd_step must be > 0");
  const std::size_t per_batch = opt.walks / opt.batches;
  GradCheckResult result;

  // Adjoint gradients per batch.
  std::vector<std::size_t> sizes;
  for (ParamField f : opt.fields) {
    const Field& field = field_ref(p, f);
    sizes.push_back(field.is_constant() ? 1 : field.tex().size());
  }
  std::vector<BatchStats> adj;
  for (std::size_t s : sizes) adj.emplace_back(s);
  // per-batch adjoint values, paired with the finite differences below
  std::vector<std::vector<double>> per_batch_adj(opt.fields.size());
  for (std::size_t fi = 0; fi < sizes.size(); ++fi) per_batch_adj[fi].assign(sizes[fi] * opt.batches, 0.0);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < opt.batches; ++b) {
    const LossGradient lg = loss_gradient(p, loss, per_batch, derive_seed(seed, b), opt.threads);
    loss_sum += lg.loss;
    for (std::size_t fi = 0; fi < opt.fields.size(); ++fi) {
      std::span<const double> g = gradient_values(gradient_slot(lg.gradients, opt.fields[fi]), field_ref(p, opt.fields[fi]));
      for (std::size_t k = 0; k < g.size(); ++k) {
        adj[fi].add(k, g[k]);
        per_batch_adj[fi][k * opt.batches + b] = g[k];
      }
    }
  }
  result.loss = loss_sum / static_cast<double>(opt.batches);

  result.pass = true;
  for (std::size_t fi = 0; fi < opt.fields.size(); ++fi) {
    const ParamField field = opt.fields[fi];
    const bool scalar = field_ref(p, field).is_constant();
    GradCheckSummary summary;
    summary.field = field;
    summary.tolerance = opt.tolerance > 0.0 ? opt.tolerance : default_gradcheck_tolerance(field);
    double max_abs = 0.0;
    for (std::size_t k = 0; k < sizes[fi]; ++k) max_abs = std::max(max_abs, std::abs(adj[fi].mean(k, opt.batches)));

    for (std::size_t k = 0; k < sizes[fi]; ++k) {
      GradCheckRow row;
      row.field = field;
      row.texel = scalar ? -1 : static_cast<long>(k);
      row.adjoint = adj[fi].mean(k, opt.batches);
      row.adjoint_se = adj[fi].se(k, opt.batches);
      row.selected = max_abs > 0.0 && std::abs(row.adjoint) > opt.select_fraction * max_abs;
      if (row.selected || opt.fd_all) {
        ParamRef ref{field, scalar ? std::nullopt : std::optional<std::size_t>(k)};
        PDEProblem work = p;
        const double theta = parameter(work, ref);
        const double h = opt.fd_step * std::max(1.0, std::abs(theta));
        BatchStats fd(2);
        for (std::size_t b = 0; b < opt.batches; ++b) {
          const double v = fd_oracle(work, loss, ref, h, per_batch, derive_seed(seed, b), opt.threads);
          fd.add(0, v);
          fd.add(1, per_batch_adj[fi][k * opt.batches + b] - v);
        }
        row.fd = fd.mean(0, opt.batches);
        row.fd_se = fd.se(0, opt.batches);
        row.diff_se = fd.se(1, opt.batches);
        row.evaluated = true;
        row.rel_err = std::abs(row.adjoint - row.fd) / std::max(std::abs(row.fd), 1e-300);
      }
      if (row.selected) {
        ++summary.selected;
        summary.max_rel_err = std::max(summary.max_rel_err, row.rel_err);
        summary.max_rel_se = std::max(summary.max_rel_se, row.adjoint_se / std::abs(row.adjoint));
        summary.max_rel_diff_se = std::max(summary.max_rel_diff_se, row.diff_se / std::abs(row.fd));
      }
      result.rows.push_back(row);
    }
    summary.pass = summary.selected > 0 && summary.max_rel_err < summary.tolerance;
    result.pass = result.pass && summary.pass;
    result.summaries.push_back(summary);
  }
  return result;
}

}  // namespace dwos
