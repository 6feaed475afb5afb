#include <doctest.h>

#include <cmath>
#include <vector>

#include "dwos/adjoint.hpp"
#include "dwos/bessel.hpp"
#include "dwos/errors.hpp"
#include "dwos/solvers.hpp"

using namespace dwos;

namespace {

const Extent kSquare{-1, -1, 1, 1};

GridTexture smooth_texture(std::size_t n, double base, double amp, double phase) {
  return texture_from_function(n, n, kSquare, [&](const Vec3& x) {
    return base + amp * std::sin(2.0 * x.x + phase) * std::cos(1.5 * x.y - phase);
  });
}

PDEProblem poisson_texture_problem() {
  PDEProblem p;
  p.kind = PdeKind::Poisson;
  p.domain = unit_disk();
  p.source = Field::texture(smooth_texture(8, 1.0, 0.5, 0.2));
  p.boundary = BoundaryCondition::texture(smooth_texture(4, 0.3, 0.2, 1.0));
  p.eps = EpsilonShell{2e-3};
  return p;
}

PDEProblem elliptic_texture_problem() {
  PDEProblem p;
  p.kind = PdeKind::Elliptic;
  p.domain = Domain(2, {Ball{{0, 0, 0}, 1.0, Side::Inside}, Ball{{0.35, 0.3, 0}, 0.2, Side::Outside}});
  p.source = Field::texture(smooth_texture(8, 2.0, 1.0, 0.4));
  p.sigma = Field::texture(smooth_texture(8, 3.0, 2.0, 0.9));
  p.alpha = Field::texture(smooth_texture(8, 1.0, 0.3, 1.7));
  p.boundary = BoundaryCondition::constant(0.2);
  p.eps = EpsilonShell{2e-3};
  p.sigma_bar = default_sigma_bar(p);
  return p;
}

LossSpec small_loss(const PDEProblem& p, std::size_t n) {
  LossSpec l;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 x{-0.7 + 1.4 * (i + 0.5) / n, -0.7 + 1.4 * (j + 0.5) / n, 0};
      if (p.domain.distance_to_boundary(x) > 0.05) l.points.push_back(x);
    }
  }
  for (std::size_t i = 0; i < l.points.size(); ++i) l.reference.push_back(0.1 * static_cast<double>(i % 3));
  return l;
}

// Analytic partials of the radial screened solutions at the disk centre.
double d_source_solution_dsigma(double sigma) {
  // u = (1 - 1/I0(s)) / sigma, s = sqrt(sigma)
  const double s = std::sqrt(sigma);
  const double i0 = bessel::i0(s);
  const double i1 = bessel::i1(s);
  return -(1.0 - 1.0 / i0) / (sigma * sigma) + (i1 / (i0 * i0)) / (2.0 * s * sigma);
}

double d_boundary_solution_dsigma(double sigma) {
  // u = 1 / I0(s)
  const double s = std::sqrt(sigma);
  const double i0 = bessel::i0(s);
  return -bessel::i1(s) / (i0 * i0) / (2.0 * s);
}

}  // namespace

TEST_SUITE("adjoint") {

TEST_CASE("zero delta leaves the buffers untouched") {
  const PDEProblem p = elliptic_texture_problem();
  ParamGradients g = make_gradients(p);
  for (std::uint64_t j = 0; j < 50; ++j) {
    AdjointInput a;
    a.x0 = {0.1, -0.3, 0};
    a.seed = {4, j};
    a.u_primal = solve_elliptic(p, a.x0, a.seed).value;
    a.delta_u = 0.0;
    grad_elliptic(p, a, g);
  }
  for (double v : g.source.texels.values()) CHECK(v == 0.0);
  for (double v : g.alpha.texels.values()) CHECK(v == 0.0);
  for (double v : g.sigma.texels.values()) CHECK(v == 0.0);
}

TEST_CASE("poisson source footprint sums to the replayed green norms") {
  PDEProblem p = poisson_texture_problem();
  p.source = Field::texture(GridTexture(8, 8, kSquare, 1.0));
  for (std::uint64_t j = 0; j < 100; ++j) {
    WalkTrace t;
    AdjointInput a;
    a.x0 = {0.2, 0.3, 0};
    a.seed = {8, j};
    a.delta_u = 1.0;
    solve_poisson(p, a.x0, a.seed, &t);
    double expected = 0.0;
    for (std::size_t k = 0; k + 1 < t.vertices.size(); ++k) {
      const double r = p.domain.distance_to_boundary(t.vertices[k]);
      expected += r * r / 4.0;
    }
    ParamGradients g = make_gradients(p);
    grad_poisson(p, a, g);
    double sum = 0.0;
    for (double v : g.source.texels.values()) sum += v;
    CHECK(sum == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("screened replay with sigma zero equals the poisson gradient") {
  PDEProblem p = poisson_texture_problem();
  PDEProblem q = p;
  q.kind = PdeKind::ScreenedPoisson;
  q.sigma = Field::constant(0.0);
  for (std::uint64_t j = 0; j < 200; ++j) {
    AdjointInput a;
    a.x0 = {-0.4, 0.1, 0};
    a.seed = {12, j};
    a.delta_u = 0.7;
    a.u_primal = solve_screened(q, a.x0, a.seed).value;
    ParamGradients gp = make_gradients(p);
    ParamGradients gs = make_gradients(q);
    grad_poisson(p, a, gp);
    grad_screened(q, a, gs);
    bool same = true;
    for (std::size_t i = 0; i < gp.source.texels.size(); ++i) same = same && gp.source.texels[i] == gs.source.texels[i];
    for (std::size_t i = 0; i < gp.boundary.texels.size(); ++i) {
      same = same && gp.boundary.texels[i] == gs.boundary.texels[i];
    }
    CHECK(same);
  }
}

TEST_CASE("zero solution gives zero sigma gradient") {
  PDEProblem p;
  p.kind = PdeKind::ScreenedPoisson;
  p.sigma = Field::constant(10.0);
  for (std::uint64_t j = 0; j < 100; ++j) {
    AdjointInput a;
    a.x0 = {0.3, 0, 0};
    a.seed = {1, j};
    a.delta_u = 1.0;
    a.u_primal = solve_screened(p, a.x0, a.seed).value;
    CHECK(a.u_primal == 0.0);
    ParamGradients g = make_gradients(p);
    grad_screened(p, a, g);
    CHECK(g.sigma.scalar == 0.0);
  }
}

TEST_CASE("replay trajectories match the primal traces") {
  PDEProblem screened = poisson_texture_problem();
  screened.kind = PdeKind::ScreenedPoisson;
  screened.sigma = Field::constant(6.0);
  const PDEProblem poisson = poisson_texture_problem();
  const PDEProblem elliptic = elliptic_texture_problem();
  for (const PDEProblem* p : std::initializer_list<const PDEProblem*>{&poisson, &screened, &elliptic}) {
    int mismatches = 0;
    for (std::uint64_t j = 0; j < 300; ++j) {
      WalkTrace primal, replay;
      AdjointInput a;
      a.x0 = {0.05, -0.5, 0};
      a.seed = {21, j};
      a.delta_u = 1.0;
      a.u_primal = solve_walk(*p, a.x0, a.seed, &primal).value;
      ParamGradients g = make_gradients(*p);
      grad_walk(*p, a, g, &replay);
      mismatches += primal.vertices != replay.vertices || primal.events != replay.events;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("a wrong primal value is reported as divergence") {
  const PDEProblem p = elliptic_texture_problem();
  AdjointInput a;
  a.x0 = {0.1, 0.1, 0};
  a.seed = {2, 3};
  a.delta_u = 1.0;
  a.u_primal = solve_elliptic(p, a.x0, a.seed).value + 0.25;
  ParamGradients g = make_gradients(p);
  CHECK_THROWS_AS(grad_elliptic(p, a, g), ReplayDivergence);
  a.u_primal = std::nan("");
  CHECK_THROWS_AS(grad_elliptic(p, a, g), ConfigError);
}

TEST_CASE("gradients are linear in delta") {
  const PDEProblem p = elliptic_texture_problem();
  for (std::uint64_t j = 0; j < 30; ++j) {
    AdjointInput a;
    a.x0 = {-0.2, 0.4, 0};
    a.seed = {33, j};
    a.u_primal = solve_elliptic(p, a.x0, a.seed).value;
    a.delta_u = 1.0;
    ParamGradients one = make_gradients(p);
    grad_elliptic(p, a, one);
    a.delta_u = 4.0;
    ParamGradients four = make_gradients(p);
    grad_elliptic(p, a, four);
    bool exact = true;
    for (std::size_t i = 0; i < one.alpha.texels.size(); ++i) {
      exact = exact && four.alpha.texels[i] == 4.0 * one.alpha.texels[i];
      exact = exact && four.sigma.texels[i] == 4.0 * one.sigma.texels[i];
      exact = exact && four.source.texels[i] == 4.0 * one.source.texels[i];
    }
    CHECK(exact);
  }
}

// For source, boundary, sigma-texture and alpha-texture parameters the
// sampled path does not depend on the parameter, so a common-seed central
// difference of the loss must agree with the adjoint up to truncation error.
TEST_CASE("common seed finite differences agree walk by walk") {
  SUBCASE("poisson source and boundary") {
    const PDEProblem p = poisson_texture_problem();
    const LossSpec loss = small_loss(p, 4);
    const LossGradient lg = loss_gradient(p, loss, 16, 99);
    for (std::size_t t : {9u, 18u, 27u, 36u}) {
      const ParamRef ref{ParamField::Source, t};
      const double fd = fd_oracle(p, loss, ref, 1e-4, 16, 99);
      CHECK(gradient_value(lg.gradients, ref) == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
    }
    for (std::size_t t : {0u, 5u, 15u}) {
      const ParamRef ref{ParamField::Boundary, t};
      const double fd = fd_oracle(p, loss, ref, 1e-4, 16, 99);
      CHECK(gradient_value(lg.gradients, ref) == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
    }
  }
  SUBCASE("elliptic sigma and alpha textures") {
    const PDEProblem p = elliptic_texture_problem();
    const LossSpec loss = small_loss(p, 4);
    const LossGradient lg = loss_gradient(p, loss, 16, 98);
    for (std::size_t t : {19u, 27u, 36u, 44u}) {
      for (ParamField f : {ParamField::Sigma, ParamField::Alpha, ParamField::Source}) {
        const ParamRef ref{f, t};
        const double fd = fd_oracle(p, loss, ref, 1e-5, 16, 98);
        CAPTURE(t);
        CAPTURE(static_cast<int>(f));
        CHECK(gradient_value(lg.gradients, ref) == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
      }
    }
  }
}

TEST_CASE("scalar sigma gradient against the radial solution") {
  const double sigma = 10.0;
  for (bool source : {true, false}) {
    PDEProblem p;
    p.kind = PdeKind::ScreenedPoisson;
    p.sigma = Field::constant(sigma);
    p.source = Field::constant(source ? 1.0 : 0.0);
    p.boundary = BoundaryCondition::constant(source ? 0.0 : 1.0);
    p.eps = EpsilonShell{1e-4};
    const int n = 40000;
    double sum = 0.0, sum2 = 0.0;
    for (int j = 0; j < n; ++j) {
      AdjointInput a;
      a.seed = {55, static_cast<std::uint64_t>(j)};
      a.delta_u = 1.0;
      a.u_primal = solve_screened(p, a.x0, a.seed).value;
      ParamGradients g = make_gradients(p);
      grad_screened(p, a, g);
      sum += g.sigma.scalar;
      sum2 += g.sigma.scalar * g.sigma.scalar;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    const double expected = source ? d_source_solution_dsigma(sigma) : d_boundary_solution_dsigma(sigma);
    CAPTURE(source);
    CAPTURE(mean);
    CAPTURE(se);
    CHECK(std::abs(mean - expected) < 3.0 * se);
  }
}

TEST_CASE("adjoint pass is thread independent") {
  const PDEProblem p = elliptic_texture_problem();
  const LossSpec loss = small_loss(p, 5);
  const LossGradient a = loss_gradient(p, loss, 24, 5, 1);
  const LossGradient b = loss_gradient(p, loss, 24, 5, 3);
  CHECK(a.loss == b.loss);
  bool same = true;
  for (std::size_t i = 0; i < a.gradients.alpha.texels.size(); ++i) {
    same = same && a.gradients.alpha.texels[i] == b.gradients.alpha.texels[i];
    same = same && a.gradients.sigma.texels[i] == b.gradients.sigma.texels[i];
  }
  CHECK(same);
}

TEST_CASE("finite difference harness") {
  CHECK(central_difference([](double t) { return t * t; }, 3.0, 1e-4) == doctest::Approx(6.0).epsilon(1e-9));
  CHECK_THROWS_AS(central_difference([](double t) { return t; }, 0.0, 0.0), ConfigError);

  // texel (0, 0) only influences points outside the disk
  PDEProblem p = poisson_texture_problem();
  p.source = Field::texture(GridTexture(8, 8, Extent{-2, -2, 2, 2}, 1.0));
  LossSpec loss;
  loss.points = {{0.1, 0.1, 0}, {-0.2, 0.3, 0}};
  loss.reference = {0.0, 0.0};
  const LossGradient lg = loss_gradient(p, loss, 64, 3);
  CHECK(fd_oracle(p, loss, ParamRef{ParamField::Source, 0u}, 1e-3, 64, 3) == 0.0);
  CHECK(gradient_value(lg.gradients, ParamRef{ParamField::Source, 0u}) == 0.0);
}

TEST_CASE("parameter references") {
  PDEProblem p = poisson_texture_problem();
  CHECK_THROWS_AS(parameter(p, ParamRef{ParamField::Sigma, 0u}), ShapeMismatch);
  CHECK_THROWS_AS(parameter(p, ParamRef{ParamField::Source, std::nullopt}), ShapeMismatch);
  CHECK_THROWS_AS(parameter(p, ParamRef{ParamField::Source, 64u}), ShapeMismatch);
  parameter(p, ParamRef{ParamField::Source, 10u}) = 7.0;
  CHECK(p.source.tex().values()[10] == 7.0);
  parameter(p, ParamRef{ParamField::Sigma, std::nullopt}) = 2.0;
  CHECK(p.sigma.constant_value() == 2.0);
}

}
