// Acceptance runner: one PASS/FAIL line per criterion.
//   dwos_acceptance            all criteria
//   dwos_acceptance --only 5   a single criterion

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <new>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dwos/adjoint.hpp"
#include "dwos/bessel.hpp"
#include "dwos/errors.hpp"
#include "dwos/kernels.hpp"
#include "dwos/optimize.hpp"
#include "dwos/solvers.hpp"

// Global allocation counter for the constant-memory criterion.
namespace {
std::atomic<long long> g_allocations{0};
}

void* operator new(std::size_t n) {
  g_allocations.fetch_add(1, std::memory_order_relaxed);
  if (void* p = std::malloc(n ? n : 1)) return p;
  throw std::bad_alloc();
}
void* operator new[](std::size_t n) {
  g_allocations.fetch_add(1, std::memory_order_relaxed);
  if (void* p = std::malloc(n ? n : 1)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }

using namespace dwos;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

const std::vector<int> kDims{2, 3};
const std::vector<double> kSigmas{0.0, 0.5, 10.0};
const std::vector<double> kRadii{0.1, 1.0, 5.0};

// 1 ------------------------------------------------------------------------

Outcome kernel_norms() {
  double worst = 0.0;
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (int dim : kDims) {
    for (double sigma : kSigmas) {
      for (double R : kRadii) {
        const BallKernel k(dim, {}, R, sigma);
        auto shell = [&](double r) {
          if (r <= 0.0 || r >= R) return 0.0;
          return (dim == 2 ? 2.0 * kPi * r : 4.0 * kPi * r * r) * k.green(r);
        };
        const double q = integrator.integrate(shell, 0.0, R, 1e-14);
        worst = std::max(worst, std::abs(k.green_norm() - q) / q);
      }
    }
  }
  return {worst < 1e-6, "max rel err " + num(worst) + " over 18 cases (tol 1e-6)"};
}

// 2 ------------------------------------------------------------------------

Outcome poisson_identity() {
  double worst = 0.0;
  for (int dim : kDims) {
    for (double sigma : kSigmas) {
      for (double R : kRadii) {
        const BallKernel k(dim, {}, R, sigma);
        const double rhs = (1.0 - sigma * k.green_norm()) / k.sphere_area();
        worst = std::max(worst, std::abs(k.poisson_kernel() - rhs) / std::max(1.0, std::abs(rhs)));
      }
    }
  }
  return {worst <= 1e-12, "max err " + num(worst) + " (tol 1e-12 max(1,|P|))"};
}

// 3 ------------------------------------------------------------------------

PDEProblem disk(PdeKind kind, double f, double g, double sigma, double eps) {
  PDEProblem p;
  p.kind = kind;
  p.domain = unit_disk();
  p.source = Field::constant(f);
  p.boundary = BoundaryCondition::constant(g);
  p.sigma = Field::constant(sigma);
  p.eps = EpsilonShell{eps};
  return p;
}

Estimate one_point(const PDEProblem& p, Vec3 x, std::size_t walks, std::uint64_t seed) {
  const std::vector<Vec3> pts{x};
  return estimate_solution(p, pts, walks, seed)[0];
}

double z_score(const Estimate& e, double expected) {
  const double se = e.standard_error();
  const double err = std::abs(e.mean - expected);
  // walks started at the centre of the disk finish in one step, with zero variance
  if (se == 0.0) return err <= 1e-12 * std::max(1.0, std::abs(expected)) ? 0.0 : INFINITY;
  return err / se;
}

Outcome primal_analytic() {
  const std::size_t walks = 100000;
  const double sigma = 10.0;
  const double s = std::sqrt(sigma);
  const Vec3 x{0.3, 0.4, 0};  // r = 0.5
  const Estimate a = one_point(disk(PdeKind::Poisson, 1.0, 0.0, 0.0, 1e-4), x, walks, 301);
  const double pa = (1.0 - 0.25) / 4.0;
  const Estimate b = one_point(disk(PdeKind::ScreenedPoisson, 1.0, 0.0, sigma, 1e-4), x, walks, 302);
  const double pb = (1.0 - bessel::i0(0.5 * s) / bessel::i0(s)) / sigma;
  const Estimate c = one_point(disk(PdeKind::ScreenedPoisson, 0.0, 1.0, sigma, 1e-4), x, walks, 303);
  const double pc = bessel::i0(0.5 * s) / bessel::i0(s);
  const Estimate d = one_point(disk(PdeKind::ScreenedPoisson, 1.0, 0.0, sigma, 1e-4), {}, walks, 304);
  const double pd = (1.0 - 1.0 / bessel::i0(s)) / sigma;
  const double z[] = {z_score(a, pa), z_score(b, pb), z_score(c, pc), z_score(d, pd)};
  const bool pass = std::all_of(std::begin(z), std::end(z), [](double v) { return v < 3.0; });
  return {pass, "poisson f=1 " + num(a.mean, 6) + " vs " + num(pa, 6) + " (z " + num(z[0], 3) + "), screened f=1 " +
                    num(b.mean, 6) + " vs " + num(pb, 6) + " (z " + num(z[1], 3) + "), screened g=1 " +
                    num(c.mean, 6) + " vs " + num(pc, 6) + " (z " + num(z[2], 3) + "), screened centre " +
                    num(d.mean, 6) + " vs " + num(pd, 6) + " (z " + num(z[3], 3) + ")"};
}

// 4 ------------------------------------------------------------------------

Outcome elliptic_equivalence() {
  const std::size_t walks = 100000;
  PDEProblem e = disk(PdeKind::Elliptic, 1.0, 0.5, 4.0, 1e-3);
  e.sigma_bar = default_sigma_bar(e);
  const PDEProblem s = disk(PdeKind::ScreenedPoisson, 1.0, 0.5, 4.0, 1e-3);
  const Vec3 x{0.3, -0.2, 0};
  const Estimate a = one_point(e, x, walks, 401);
  const Estimate b = one_point(s, x, walks, 402);
  const double z = std::abs(a.mean - b.mean) / std::sqrt(a.variance_of_mean + b.variance_of_mean);
  return {z < 3.0, "elliptic " + num(a.mean, 6) + " vs screened " + num(b.mean, 6) + " (z " + num(z, 3) + ")"};
}

// 5 and 9 ------------------------------------------------------------------

struct GradConfig {
  std::string name;
  PDEProblem problem;
  ParamField field;
  std::size_t walks;
};

const Field& field_ref(const PDEProblem& p, ParamField f) {
  switch (f) {
    case ParamField::Source:
      return p.source;
    case ParamField::Sigma:
      return p.sigma;
    case ParamField::Alpha:
      return p.alpha;
    case ParamField::Boundary:
      break;
  }
  throw ConfigError("no field");
}

std::vector<double> values_of(const FieldGradient& g, const Field& f) {
  if (f.is_constant()) return {g.scalar};
  return {g.texels.values().begin(), g.texels.values().end()};
}

std::vector<GradConfig> gradient_configs() {
  std::vector<GradConfig> out;
  {
    PDEProblem p;
    p.kind = PdeKind::ScreenedPoisson;
    p.domain = disk_with_obstacles();
    p.sigma = Field::constant(10.0);
    p.source = Field::texture(reference_source(8));
    out.push_back({"source texture", p, ParamField::Source, 1024});
  }
  {
    PDEProblem p;
    p.kind = PdeKind::ScreenedPoisson;
    p.domain = unit_disk();
    p.sigma = Field::constant(10.0);
    p.source = Field::constant(1.0);
    out.push_back({"scalar sigma", p, ParamField::Sigma, 4096});
  }
  {
    PDEProblem p;
    p.kind = PdeKind::Elliptic;
    p.domain = disk_with_obstacles();
    p.source = Field::constant(8.0);
    p.sigma = Field::texture(reference_sigma(8));
    p.sigma_bar = default_sigma_bar(p);
    out.push_back({"sigma texture", p, ParamField::Sigma, 1024});
  }
  {
    PDEProblem p;
    p.kind = PdeKind::Elliptic;
    p.domain = disk_with_obstacles();
    p.source = Field::constant(8.0);
    p.sigma = Field::constant(1.0);
    p.alpha = Field::texture(reference_alpha(8));
    p.sigma_bar = default_sigma_bar(p);
    out.push_back({"alpha texture", p, ParamField::Alpha, 1024});
  }
  for (auto& c : out) c.problem.eps = EpsilonShell{2e-3};
  return out;
}

LossSpec zero_reference_loss(const PDEProblem& p) {
  LossSpec l;
  l.points = measurement_grid(p.domain, 16, 16, 2.0 * p.eps.epsilon);
  l.reference.assign(l.points.size(), 0.0);
  return l;
}

Outcome gradient_validation() {
  bool pass = true;
  std::string detail;
  for (const GradConfig& c : gradient_configs()) {
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckOptions opt;
    opt.fields = {c.field};
    opt.walks = c.walks;
    opt.batches = 16;
    const GradCheckResult r = check_gradients(c.problem, zero_reference_loss(c.problem), opt, 500);
    const GradCheckSummary& s = r.summaries[0];
    const bool ok = s.pass && s.max_rel_diff_se < 0.5 * s.tolerance;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pass = pass && ok;
    detail += c.name + ": " + std::to_string(s.selected) + " texels, max rel err " + num(s.max_rel_err, 3) +
              " (tol " + num(s.tolerance, 2) + "), paired rel SE " + num(s.max_rel_diff_se, 3) + ", adjoint rel SE " +
              num(s.max_rel_se, 3) + ", " + num(secs, 3) + " s" + (ok ? "" : " [fail]") + "; ";
  }
  return {pass, detail};
}

// Per-batch adjoint gradients, one row per batch.
std::vector<std::vector<double>> adjoint_batches(const PDEProblem& p, const LossSpec& loss, ParamField field,
                                                 std::size_t walks, std::size_t batches, std::uint64_t seed) {
  std::vector<std::vector<double>> rows;
  for (std::size_t b = 0; b < batches; ++b) {
    const LossGradient lg = loss_gradient(p, loss, walks / batches, derive_seed(seed, b));
    rows.push_back(values_of(gradient_slot(lg.gradients, field), field_ref(p, field)));
  }
  return rows;
}

std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

// Each configuration is scored on the sum of the texels with |gradient| above
// 10% of the largest one, so there is a single z per configuration.
Outcome detached_sampling() {
  bool pass = true;
  std::string detail;
  const std::size_t batches = 16;
  for (const GradConfig& c : gradient_configs()) {
    const LossSpec loss = zero_reference_loss(c.problem);
    PDEProblem coarse = c.problem;
    coarse.radial_tolerance = 1e-4;
    const auto a = adjoint_batches(c.problem, loss, c.field, c.walks, batches, 900);
    const auto b = adjoint_batches(coarse, loss, c.field, c.walks, batches, 901);
    const std::size_t n = a[0].size();
    std::vector<double> mean_a(n, 0.0);
    for (const auto& row : a)
      for (std::size_t k = 0; k < n; ++k) mean_a[k] += row[k] / static_cast<double>(batches);
    double max_abs = 0.0;
    for (double v : mean_a) max_abs = std::max(max_abs, std::abs(v));

    std::vector<double> sum_a(batches, 0.0), sum_b(batches, 0.0);
    double worst_texel = 0.0;
    std::size_t scored = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(mean_a[k]) <= 0.1 * max_abs) continue;
      ++scored;
      std::vector<double> ca, cb;
      for (std::size_t j = 0; j < batches; ++j) {
        sum_a[j] += a[j][k];
        sum_b[j] += b[j][k];
        ca.push_back(a[j][k]);
        cb.push_back(b[j][k]);
      }
      const auto [ma, sa] = mean_and_se(ca);
      const auto [mb, sb] = mean_and_se(cb);
      worst_texel = std::max(worst_texel, std::abs(ma - mb) / std::hypot(sa, sb));
    }
    const auto [ma, sa] = mean_and_se(sum_a);
    const auto [mb, sb] = mean_and_se(sum_b);
    const double z = std::abs(ma - mb) / std::hypot(sa, sb);
    const bool ok = scored > 0 && z < 3.0;
    pass = pass && ok;
    detail += c.name + ": z " + num(z, 3) + " (" + num(ma, 4) + " vs " + num(mb, 4) + ", " + std::to_string(scored) +
              " texels, largest single-texel z " + num(worst_texel, 3) + ")" + (ok ? "" : " [fail]") + "; ";
  }
  return {pass, detail};
}

// 6 ------------------------------------------------------------------------

Outcome replay_determinism() {
  std::vector<std::pair<std::string, PDEProblem>> problems;
  PDEProblem poisson = disk(PdeKind::Poisson, 1.0, 0.3, 0.0, 1e-3);
  poisson.source = Field::texture(reference_source(8));
  poisson.domain = disk_with_obstacles();
  problems.emplace_back("poisson", poisson);
  PDEProblem screened = poisson;
  screened.kind = PdeKind::ScreenedPoisson;
  screened.sigma = Field::constant(10.0);
  problems.emplace_back("screened", screened);
  PDEProblem elliptic = poisson;
  elliptic.kind = PdeKind::Elliptic;
  elliptic.sigma = Field::texture(reference_sigma(8));
  elliptic.alpha = Field::texture(reference_alpha(8));
  elliptic.sigma_bar = default_sigma_bar(elliptic);
  problems.emplace_back("elliptic", elliptic);

  bool pass = true;
  std::string detail;
  for (const auto& [name, p] : problems) {
    int mismatched = 0;
    int divergences = 0;
    for (std::uint64_t j = 0; j < 1000; ++j) {
      WalkTrace primal, replay;
      AdjointInput a;
      a.x0 = Vec3{-0.1 + 0.0004 * j, 0.05, 0};
      a.seed = {600, j};
      a.delta_u = 1.0;
      a.u_primal = solve_walk(p, a.x0, a.seed, &primal).value;
      ParamGradients g = make_gradients(p);
      try {
        grad_walk(p, a, g, &replay);
      } catch (const ReplayDivergence&) {
        ++divergences;
      }
      mismatched += primal.vertices != replay.vertices || primal.events != replay.events;
    }
    pass = pass && mismatched == 0 && divergences == 0;
    detail += name + ": " + std::to_string(mismatched) + " mismatched, " + std::to_string(divergences) +
              " divergences; ";
  }
  return {pass, detail};
}

// 7 ------------------------------------------------------------------------

Outcome constant_memory() {
  // sigma = 0 with a large sigma_bar makes almost every event a short volume
  // hop, so the walk length grows roughly like sigma_bar.
  PDEProblem p = disk(PdeKind::Elliptic, 1.0, 1.0, 0.0, 1e-3);
  p.source = Field::texture(reference_source(8));
  p.alpha = Field::texture(reference_alpha(8));
  p.max_steps = 1000000;
  PDEProblem short_p = p;
  short_p.sigma_bar = default_sigma_bar(p);
  PDEProblem long_p = p;
  long_p.sigma_bar = 2000.0;

  auto measure = [](const PDEProblem& q, std::uint64_t seed, int& steps) {
    AdjointInput a;
    a.seed = {700, seed};
    a.delta_u = 1.0;
    const WalkResult w = solve_walk(q, a.x0, a.seed);
    steps = w.steps;
    a.u_primal = w.value;
    ParamGradients g = make_gradients(q);
    grad_walk(q, a, g);  // warm-up
    g.clear();
    const long long before = g_allocations.load();
    grad_walk(q, a, g);
    return g_allocations.load() - before;
  };
  int short_steps = 0;
  int long_steps = 0;
  long long short_alloc = 0;
  long long long_alloc = 0;
  // pick walks of about 10 and at least 1000 steps
  for (std::uint64_t s = 0; s < 200; ++s) {
    int n = 0;
    const long long a = measure(short_p, s, n);
    if (n >= 5 && n <= 20) {
      short_steps = n;
      short_alloc = a;
      break;
    }
  }
  for (std::uint64_t s = 0; s < 50; ++s) {
    int n = 0;
    const long long a = measure(long_p, s, n);
    if (n >= 1000) {
      long_steps = n;
      long_alloc = a;
      break;
    }
  }
  // also the screened and Poisson replays
  PDEProblem scr = disk(PdeKind::ScreenedPoisson, 1.0, 1.0, 5.0, 1e-3);
  int n = 0;
  const long long screened_alloc = measure(scr, 3, n);
  const bool found = short_steps > 0 && long_steps >= 1000;
  return {found && short_alloc == long_alloc && screened_alloc == 0,
          "allocations: " + std::to_string(short_alloc) + " for " + std::to_string(short_steps) + " steps, " +
              std::to_string(long_alloc) + " for " + std::to_string(long_steps) + " steps, screened " +
              std::to_string(screened_alloc)};
}

// 8 ------------------------------------------------------------------------

std::vector<double> block_means(const std::vector<IterationRecord>& h, std::size_t block) {
  std::vector<double> out;
  for (std::size_t b = 0; b + block <= h.size(); b += block) {
    double s = 0.0;
    for (std::size_t k = b; k < b + block; ++k) s += h[k].loss;
    out.push_back(s / static_cast<double>(block));
  }
  return out;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] < v[k - 1])) return false;
  }
  return v.size() >= 2;
}

// The loss of a Monte Carlo image cannot drop below the mean variance of the
// estimated pixels plus that of the reference pixels.
double noise_floor(const Experiment& e, PDEProblem final_problem) {
  final_problem.sigma_bar = default_sigma_bar(final_problem);
  auto mean_variance = [&](const PDEProblem& p, std::size_t walks) {
    const std::vector<Estimate> est = estimate_solution(p, e.loss.points, walks, 4242);
    double v = 0.0;
    for (const Estimate& x : est) v += x.variance_of_mean;
    return v / static_cast<double>(est.size());
  };
  const ExperimentScale scale;
  const double ratio = static_cast<double>(scale.reference_walks) / static_cast<double>(scale.walks);
  return mean_variance(final_problem, scale.walks) + mean_variance(e.reference, scale.walks) / ratio;
}

std::vector<ExperimentKind> experiments{ExperimentKind::Source, ExperimentKind::Screening, ExperimentKind::Diffusion};

Outcome optimization() {
  bool pass = true;
  std::string detail;
  for (ExperimentKind kind : experiments) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentScale scale;
    Experiment e = make_experiment(kind, scale, 800);
    e.optimizer.snapshot_every = 5;
    auto progress = [&](int it, const PDEProblem& p, const ParamGradients&) {
      const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "  " << to_string(kind) << " iteration " << it << ", sigma_bar " << num(p.sigma_bar, 4) << " ("
                << num(t, 4) << " s)" << std::endl;
    };
    const OptimizeResult r = optimize(e.initial, e.loss, e.optimizer, 801, progress);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double first = r.history.front().loss;
    const double last = r.history.back().loss;
    const std::vector<double> blocks = block_means(r.history, 10);
    bool ok;
    std::string what;
    if (kind == ExperimentKind::Source) {
      double best = first;
      for (const auto& h : r.history) best = std::min(best, h.loss);
      ok = last < 0.1 * first;
      what = "final/initial " + num(last / first, 3) + ", grad rms " + num(r.history.front().grad_rms, 3) + " -> " +
             num(r.history.back().grad_rms, 3);
      ok = ok && r.history.back().grad_rms < r.history.front().grad_rms;
    } else {
      ok = strictly_decreasing(blocks);
      what = "block means";
      for (double b : blocks) what += " " + num(b, 4);
      what += ", noise floor ~" + num(noise_floor(e, r.problem), 3);
    }
    pass = pass && ok;
    std::cerr << "  " << to_string(kind) << ": " << what << std::endl;
    detail += std::string(to_string(kind)) + ": " + what + " (" + num(secs, 3) + " s)" + (ok ? "" : " [fail]") + "; ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  std::string experiment;
  app.add_option("--experiment", experiment, "Criterion 8: run one experiment only")
      ->check(CLI::IsMember({"source", "screening", "diffusion"}));
  CLI11_PARSE(app, argc, argv);
  if (!experiment.empty()) {
    experiments = {experiment == "source"      ? ExperimentKind::Source
                   : experiment == "screening" ? ExperimentKind::Screening
                                               : ExperimentKind::Diffusion};
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kernel norms vs quadrature", kernel_norms},
      {"poisson kernel identity", poisson_identity},
      {"primal analytic agreement", primal_analytic},
      {"elliptic vs screened equivalence", elliptic_equivalence},
      {"gradient validation vs finite differences", gradient_validation},
      {"replay determinism", replay_determinism},
      {"constant-memory adjoint", constant_memory},
      {"optimization behaviour", optimization},
      {"detached estimator under sampling changes", detached_sampling},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only && id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    while (!o.detail.empty() && (o.detail.back() == ' ' || o.detail.back() == ';')) o.detail.pop_back();
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << " [" << num(secs, 3) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
