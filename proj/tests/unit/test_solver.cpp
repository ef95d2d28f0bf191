#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sktlab/solver.hpp"

using namespace sktlab;

namespace {

constexpr double kPi = std::numbers::pi;

ModelSpec skt_diffusion() {
  SktParameters p;
  p.a1 = p.a2 = 1.0;
  p.alpha11 = p.alpha22 = 1.0;
  p.alpha12 = p.alpha21 = 0.5;
  return classic_skt(p);
}

ModelSpec skt_competitive() {
  SktParameters p;
  p.a1 = p.a2 = 1.0;
  p.alpha11 = p.alpha22 = 1.0;
  p.alpha12 = p.alpha21 = 0.5;
  p.lotka_volterra = LotkaVolterra{};
  return classic_skt(p);
}

Field bump(const Grid2D& g, int m) {
  return Field::from_function(g, m, [](int c, double x, double y) {
    return 1.0 + 0.5 * (c + 1) * std::cos(kPi * x) * std::cos(kPi * y);
  });
}

Field eigenmode(const Grid2D& g) {
  return Field::from_function(g, 1, [](int, double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); });
}

double l2_distance(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a.values()[k] - b.values()[k]) * (a.values()[k] - b.values()[k]);
  return std::sqrt(s * a.grid().cell_area());
}

SolverConfig fixed(Scheme s, double dt, double t_end) {
  SolverConfig c;
  c.scheme = s;
  c.dt0 = c.dt_max = dt;
  c.dt_min = dt * 1e-6;
  c.t_end = t_end;
  c.cfl_safety = 1.0;
  return c;
}

}  // namespace

TEST(StableDt, IdentityFormula) {
  const auto g = build_grid(1, 1, 16, 16, Boundary::NeumannZero);
  EXPECT_DOUBLE_EQ(stable_dt(Field(g, 1, 0.3), heat_model(1), 1.0), 4.8828125e-4);
}

TEST(StableDt, ScalesInverselyWithLambda1) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::NeumannZero);
  // P(u) = lambda1 u^2 / 2 + 1e-9 u has A = lambda1 u + 1e-9, so the growth term dominates.
  auto model = [](double l1) {
    ModelSpec s = heat_model(1);
    s.P = PolynomialMap(1, {{{1e-9, {1}}, {0.5 * l1, {2}}}});
    return s;
  };
  const Field u(g, 1, 5.0);
  EXPECT_NEAR(stable_dt(u, model(1.0), 1.0) / stable_dt(u, model(2.0), 1.0), 2.0, 1e-6);
}

TEST(StableDt, ZeroFieldUsesDiagonalAtOrigin) {
  const auto g = build_grid(1, 1, 10, 10, Boundary::NeumannZero);
  SktParameters p;
  p.a1 = 2.0;
  p.a2 = 3.0;
  p.alpha11 = 1.0;
  const double h = 0.1;
  EXPECT_NEAR(stable_dt(Field(g, 2), classic_skt(p), 0.5), 0.5 * h * h / (8.0 * 3.0), 1e-15);
}

TEST(Step, ConstantFieldUnchangedForEveryScheme) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::NeumannZero);
  const Field u(g, 2, 1.7);
  for (auto s : {Scheme::ExplicitEuler, Scheme::ImexLagged, Scheme::NewtonImplicit}) {
    const auto [v, st] = step(u, 1e-3, skt_diffusion(), fixed(s, 1e-3, 1.0));
    EXPECT_TRUE(st.converged);
    for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(v.values()[k], 1.7, 1e-14);
  }
}

TEST(Step, NewtonOnLinearProblemTakesOneIteration) {
  const auto g = build_grid(1, 1, 16, 16, Boundary::DirichletZero);
  const auto [v, st] = step(eigenmode(g), 1e-3, heat_model(1), fixed(Scheme::NewtonImplicit, 1e-3, 1.0));
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.newton_iterations, 1);
}

TEST(Step, BackwardEulerEigenmodeFactor) {
  const double dt = 1e-3;
  double prev = 0.0;
  for (int N : {16, 32, 64}) {
    const auto g = build_grid(1, 1, N, N, Boundary::DirichletZero);
    const Field u = eigenmode(g);
    const auto [v, st] = step(u, dt, heat_model(1), fixed(Scheme::NewtonImplicit, dt, 1.0));
    Field expect = u;
    expect *= 1.0 / (1.0 + 2.0 * kPi * kPi * dt);
    const double err = (v - expect).max_abs();
    EXPECT_LT(err, 2e-3 * dt * 2.0 * kPi * kPi * 64.0 / N);
    if (prev > 0.0) EXPECT_NEAR(std::log2(prev / err), 2.0, 0.2);
    prev = err;
  }
}

TEST(Step, ImexMatchesExplicitOperatorAtFrozenCoefficients) {
  // (I - dt L_u) v = u with L_u u = div_A_grad(u), so (v - u) / dt = L_u v = div_A_grad(u) + O(dt)
  const auto g = build_grid(1, 1, 10, 10, Boundary::NeumannZero);
  const Field u = bump(g, 2);
  const double dt = 1e-6;
  const auto [v, st] = step(u, dt, skt_diffusion(), fixed(Scheme::ImexLagged, dt, 1.0));
  EXPECT_TRUE(st.converged);
  EXPECT_LE(st.linear_residual, 1e-10);
  const Field rate = div_A_grad(u, skt_diffusion());
  for (std::size_t k = 0; k < u.size(); ++k)
    EXPECT_NEAR((v.values()[k] - u.values()[k]) / dt, rate.values()[k], 0.01 * (1 + std::abs(rate.values()[k])));
}

TEST(Step, NonPositiveDtIsInputError) {
  const auto g = build_grid(1, 1, 4, 4, Boundary::NeumannZero);
  EXPECT_THROW(step(Field(g, 1, 1.0), 0.0, heat_model(1), SolverConfig{}), InputError);
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  c.dt_min = 1.0;
  EXPECT_THROW(c.validate(), InputError);
  c = SolverConfig{};
  c.cfl_safety = 1.5;
  EXPECT_THROW(c.validate(), InputError);
  c = SolverConfig{};
  c.newton_abs_tol = 0.0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Run, HeatNeumannConservesMass) {
  const auto g = build_grid(1, 1, 16, 16, Boundary::NeumannZero);
  for (auto s : {Scheme::ImexLagged, Scheme::NewtonImplicit, Scheme::ExplicitEuler}) {
    SolverConfig c = fixed(s, 2e-4, 0.02);
    const auto tr = run(bump(g, 2), heat_model(2), c);
    ASSERT_EQ(tr.terminated_reason, Termination::ReachedTend);
    const double tol = s == Scheme::ExplicitEuler ? 1e-12 : 1e-10;
    for (const auto& r : tr.records)
      for (int comp = 0; comp < 2; ++comp)
        EXPECT_NEAR(r.mass[comp], tr.records[0].mass[comp], tol * std::abs(tr.records[0].mass[comp]));
  }
}

TEST(Run, HeatDirichletEigenmodeDecay) {
  const auto g = build_grid(1, 1, 32, 32, Boundary::DirichletZero);
  const auto tr = run(eigenmode(g), heat_model(1), fixed(Scheme::NewtonImplicit, 1e-4, 0.02));
  ASSERT_EQ(tr.terminated_reason, Termination::ReachedTend);
  const double expect = tr.records.front().L2 * std::exp(-2 * kPi * kPi * 0.02);
  EXPECT_NEAR(tr.records.back().t, 0.02, 1e-15);
  EXPECT_NEAR(tr.records.back().L2 / expect, 1.0, 0.02);
}

TEST(Run, SktCompetitiveReachesEndWithFiniteNorms) {
  const auto g = build_grid(1, 1, 12, 12, Boundary::NeumannZero);
  SolverConfig c;
  c.t_end = 2.0;
  c.dt0 = 1e-3;
  c.dt_max = 0.05;
  const auto tr = run(bump(g, 2), skt_competitive(), c);
  ASSERT_EQ(tr.terminated_reason, Termination::ReachedTend);
  for (const auto& r : tr.records) {
    EXPECT_TRUE(std::isfinite(r.W12));
    EXPECT_TRUE(std::isfinite(r.energy_y));
    EXPECT_TRUE(std::isfinite(r.lambda_moment));
  }
  EXPECT_FALSE(tr.first_negative_time.has_value());
}

TEST(Run, TimesStrictlyIncreasingAndSnapshotsHit) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::NeumannZero);
  SolverConfig c;
  c.t_end = 0.3;
  c.dt0 = 0.01;
  c.dt_max = 0.07;
  c.snapshot_times = {0.0, 0.1, 0.25};
  c.record_every = 2;
  const auto tr = run(bump(g, 1), heat_model(1), c);
  for (std::size_t k = 1; k < tr.times.size(); ++k) EXPECT_GT(tr.times[k], tr.times[k - 1]);
  EXPECT_EQ(tr.times.size(), tr.records.size());
  EXPECT_EQ(tr.times.back(), 0.3);
  ASSERT_EQ(tr.snapshots.size(), 3u);
  EXPECT_NEAR(tr.snapshots[1].first, 0.1, 1e-12);
  EXPECT_NEAR(tr.snapshots[2].first, 0.25, 1e-12);
  for (double dt : tr.dt_history) EXPECT_LE(dt, 0.07 + 1e-15);
}

TEST(Run, Deterministic) {
  const auto g = build_grid(1, 1, 10, 10, Boundary::NeumannZero);
  SolverConfig c;
  c.t_end = 0.5;
  c.dt_max = 0.05;
  const auto a = run(bump(g, 2), skt_competitive(), c);
  const auto b = run(bump(g, 2), skt_competitive(), c);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.final_state.values(), b.final_state.values());
}

TEST(Run, ExplicitStiffModelTerminatesWithBlowup) {
  const auto g = build_grid(1, 1, 16, 16, Boundary::NeumannZero);
  SolverConfig c = fixed(Scheme::ExplicitEuler, 1e-3, 1.0);
  c.dt_min = 1e-4;  // above the explicit stability limit
  const auto tr = run(bump(g, 1), heat_model(1, 10.0), c);
  EXPECT_EQ(tr.terminated_reason, Termination::BlowupDetected);
  EXPECT_EQ(tr.records.size(), 1u);
}

TEST(Run, NewtonStallAtDtMinIsBlowup) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::NeumannZero);
  SolverConfig c = fixed(Scheme::NewtonImplicit, 1e-2, 1.0);
  c.max_newton = 1;
  c.newton_abs_tol = c.newton_rel_tol = 1e-300;
  c.dt_min = 5e-3;
  const auto tr = run(bump(g, 2), skt_diffusion(), c);
  EXPECT_EQ(tr.terminated_reason, Termination::BlowupDetected);
  EXPECT_GT(tr.rejections, 0u);
}

TEST(Run, SchemesAgreeAsDtShrinks) {
  const auto g = build_grid(1, 1, 10, 10, Boundary::NeumannZero);
  const auto s = skt_diffusion();
  std::vector<double> d_ie, d_in;
  for (double dt : {1e-4, 5e-5, 2.5e-5}) {
    const auto e = run(bump(g, 2), s, fixed(Scheme::ExplicitEuler, dt, 0.01)).final_state;
    const auto i = run(bump(g, 2), s, fixed(Scheme::ImexLagged, dt, 0.01)).final_state;
    const auto n = run(bump(g, 2), s, fixed(Scheme::NewtonImplicit, dt, 0.01)).final_state;
    d_ie.push_back(l2_distance(e, i));
    d_in.push_back(l2_distance(i, n));
  }
  for (const auto* d : {&d_ie, &d_in}) {
    EXPECT_NEAR((*d)[0] / (*d)[1], 2.0, 0.3);
    EXPECT_NEAR((*d)[1] / (*d)[2], 2.0, 0.3);
  }
}

TEST(Run, FirstNegativeTimeRecorded) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::DirichletZero);
  Field u0 = Field::from_function(g, 1, [](int, double x, double) { return x - 0.5; });
  const auto tr = run(u0, heat_model(1), fixed(Scheme::NewtonImplicit, 1e-3, 0.01));
  ASSERT_TRUE(tr.first_negative_time.has_value());
  EXPECT_EQ(*tr.first_negative_time, 0.0);
}

TEST(Run, SigmaZeroFreezesCoefficientsAtOrigin) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::NeumannZero);
  SolverConfig c = fixed(Scheme::NewtonImplicit, 1e-3, 0.01);
  c.sigma = 0.0;
  const auto a = run(bump(g, 2), skt_diffusion(), c);
  const auto b = run(bump(g, 2), heat_model(2), fixed(Scheme::NewtonImplicit, 1e-3, 0.01));
  EXPECT_LT(l2_distance(a.final_state, b.final_state), 1e-12);
}
