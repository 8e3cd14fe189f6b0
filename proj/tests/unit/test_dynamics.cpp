#include "nglab/dynamics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace nglab {
namespace {

using test::on_circle;

double reg_on_circle(double th) { return 1.0 + 0.7 * std::sin(5.0 * std::cos(th)); }

TEST(NoisyGd, ZeroNoiseIsDeterministicGdBitForBit) {
  const SmoothLoss ring = ring_sine_loss();
  const NoisyLoss s = anti_pgd(ring);
  Rng rng(1);
  GdOptions o;
  o.stride = 1;
  const Trajectory tr = noisy_gd(s, gaussian_noise(0.0, 2), Vec{{0.3, 1.6}}, 0.1, 500, rng, o);
  ASSERT_EQ(tr.size(), 501u);
  Vec w{{0.3, 1.6}};
  for (long k = 1; k <= 500; ++k) {
    w -= 0.1 * ring.gradient(w);
    ASSERT_EQ(tr.points[k], w) << "step " << k;
  }
}

TEST(NoisyGd, ZeroStepIsConstant) {
  Rng rng(2);
  const Vec w0{{0.3, 1.6}};
  const Trajectory tr = noisy_gd(anti_pgd(ring_sine_loss()), gaussian_noise(0.5, 2), w0, 0.0, 100, rng);
  for (const Vec& p : tr.points) EXPECT_EQ(p, w0);
}

TEST(NoisyGd, RingAntiPgdReachesTheRegMinimizer) {
  const SmoothLoss ring = ring_sine_loss();
  Rng rng = Rng::substream(5, 0);
  const Vec w = noisy_gd_final(anti_pgd(ring), gaussian_noise(0.03, 2), Vec{{0.3, 1.6}}, 0.3, 200000, rng);
  // Brute-force minimizer of the regularizer on the circle near the start.
  double best = 0, best_v = INFINITY;
  for (int i = 0; i < 100000; ++i) {
    const double th = 1.2 + 1.4 * i / 100000.0;
    if (reg_on_circle(th) < best_v) best_v = reg_on_circle(th), best = th;
  }
  EXPECT_LT(std::abs(w.norm() - 1.0), 0.02);
  EXPECT_LT(std::abs(std::atan2(w(1), w(0)) - best), 0.05);
}

TEST(NoisyGd, DivergenceAndRegionExit) {
  const SmoothLoss Q = quadratic_loss(Mat::Identity(2, 2));
  Rng rng(3);
  const Trajectory blown = noisy_gd(anti_pgd(Q), gaussian_noise(0.0, 2), Vec::Ones(2), 3.0, 1000, rng);
  EXPECT_EQ(blown.status, RunStatus::diverged);
  EXPECT_LT(blown.last_step, 1000);
  GdOptions o;
  o.region = [](const Vec& w) { return w.norm() > 0.5; };
  const Trajectory out = noisy_gd(anti_pgd(Q), gaussian_noise(0.0, 2), Vec::Ones(2), 0.1, 1000, rng, o);
  EXPECT_EQ(out.status, RunStatus::exited);
  EXPECT_LE(out.points.back().norm(), 0.5);
  EXPECT_THROW(noisy_gd(anti_pgd(Q), gaussian_noise(0.1, 3), Vec::Ones(2), 0.1, 10, rng), ConfigError);
}

TEST(NoisyGd, DefaultThinning) {
  Rng rng(4);
  const Trajectory tr = noisy_gd(anti_pgd(ring_sine_loss()), gaussian_noise(0.01, 2), Vec{{0.0, 1.0}}, 0.1,
                                 100000, rng);
  EXPECT_EQ(tr.size(), 10001u);
  EXPECT_EQ(tr.steps[1], 10);
  for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GT(tr.times[i], tr.times[i - 1]);
}

TEST(GradientFlow, ConstantOnManifold) {
  const Vec w = on_circle(0.8);
  const Trajectory tr = gradient_flow(ring_sine_loss(), w, 5.0, 20);
  for (const Vec& p : tr.points) EXPECT_LT((p - w).norm(), 1e-14);
}

TEST(GradientFlow, QuadraticAnalyticSolution) {
  const double lambda = 1.3;
  const SmoothLoss Q = quadratic_loss(lambda * Mat::Identity(1, 1));
  const Trajectory tr = gradient_flow(Q, Vec::Constant(1, 2.0), 4.0, 41);
  for (std::size_t i = 0; i < tr.size(); ++i)
    EXPECT_NEAR(tr.points[i](0), 2.0 * std::exp(-lambda * tr.times[i]), 1e-8);
}

TEST(GradientFlow, StepHalvingSelfConsistency) {
  const SmoothLoss ring = ring_sine_loss();
  const VectorField f = [&](const Vec& x) { return Vec(-ring.gradient(x)); };
  const Vec x0{{0.3, 1.6}};
  const Vec a = rk4_fixed(f, x0, 2.0, 2e-3), b = rk4_fixed(f, x0, 2.0, 1e-3);
  EXPECT_LT((a - b).norm(), 1e-8);
  const Trajectory tr = gradient_flow(ring, x0, 2.0, 2);
  EXPECT_LT((tr.points.back() - b).norm(), 1e-8);
}

TEST(ScalePlan, IndexArithmetic) {
  const ScalePlan nd{0.1, 0.1, Regime::nondegenerate, 1.0};
  EXPECT_EQ(nd.step_index(1.0), 1000);
  EXPECT_EQ(nd.step_index(0.0), 0);
  EXPECT_NEAR(nd.integrator(1.0), 100.0, 1e-12);
  const ScalePlan dg{0.1, 1.0, Regime::degenerate, 1.0};
  EXPECT_EQ(dg.step_index(1.0), 100);
  EXPECT_EQ(dg.n_steps(), 100);
  // Exact multiples of an inexact unit do not round down.
  const ScalePlan c9{0.02, 1.0, Regime::degenerate, 1.0};
  for (int k = 1; k <= 2500; ++k) ASSERT_EQ(c9.step_index(k * c9.clock_unit()), k);
}

TEST(ScalePlan, BudgetAndValidation) {
  ScalePlan p{1e-4, 1e-4, Regime::degenerate, 1.0};
  EXPECT_THROW(static_cast<void>(p.n_steps()), BudgetError);
  ScalePlan bad{0.0, 0.1, Regime::nondegenerate, 1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(uniform_grid(1.0, 1), ConfigError);
}

TEST(Rescaled, PicksIteratesOnTheSlowClock) {
  const ScalePlan plan{0.1, 0.1, Regime::nondegenerate, 1.0};
  const std::vector<double> grid = uniform_grid(1.0, 11);
  Rng rng(6);
  GdOptions o;
  o.record_at = record_steps(plan, grid);
  o.stride = 1;
  const NoisyLoss s = anti_pgd(ring_sine_loss());
  const Trajectory tr = noisy_gd(s, gaussian_noise(0.1, 2), Vec{{0.3, 1.6}}, 0.1, plan.n_steps(), rng, o);
  const Trajectory W = rescaled_process(tr, plan, grid);
  EXPECT_EQ(W.points.front(), (Vec{{0.3, 1.6}}));
  EXPECT_EQ(W.steps.back(), 1000);
  Rng replay(6);
  GdOptions all;
  all.stride = 1;
  const Trajectory full = noisy_gd(s, gaussian_noise(0.1, 2), Vec{{0.3, 1.6}}, 0.1, 1000, replay, all);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(W.points[i], full.points[plan.step_index(grid[i])]);
  const ScalePlan longer{0.1, 0.1, Regime::nondegenerate, 2.0};
  EXPECT_THROW(rescaled_process(tr, longer, uniform_grid(2.0, 3)), ConfigError);
}

TEST(Shifted, StartsAtPhiAndVanishesOnManifold) {
  const SmoothLoss ring = ring_sine_loss();
  const NoisyLoss s = anti_pgd(ring);
  const ScalePlan plan{0.1, 0.05, Regime::nondegenerate, 1.0};
  const std::vector<double> grid = uniform_grid(1.0, 21);
  GdOptions o;
  o.record_at = record_steps(plan, grid);

  Rng rng(7);
  const Vec off{{0.3, 1.6}};
  const Trajectory W = rescaled_process(noisy_gd(s, gaussian_noise(0.05, 2), off, 0.1, plan.n_steps(), rng, o), plan, grid);
  const Trajectory Y = shifted_process(ring, W, plan);
  EXPECT_LT((Y.points.front() - limit_map_phi(ring, off)).norm(), 1e-15);

  Rng rng2(8);
  const Vec on = on_circle(1.1);
  const Trajectory W2 = rescaled_process(noisy_gd(s, gaussian_noise(0.05, 2), on, 0.1, plan.n_steps(), rng2, o), plan, grid);
  const Trajectory Y2 = shifted_process(ring, W2, plan);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_LT((Y2.points[i] - W2.points[i]).norm(), 1e-12);
}

TEST(Shifted, GapDecaysExponentiallyInTheIntegrator) {
  const SmoothLoss ring = ring_sine_loss();
  // sigma = 1 makes A_n(t) = t, so the grid samples the integrator at 0..8.
  const ScalePlan plan{0.01, 1.0, Regime::nondegenerate, 8.0};
  const std::vector<double> grid = uniform_grid(8.0, 9);
  GdOptions o;
  o.record_at = record_steps(plan, grid);
  Rng rng(9);
  const Trajectory W = rescaled_process(
      noisy_gd(anti_pgd(ring), gaussian_noise(0.0, 2), Vec{{0.2, 1.4}}, 0.01, plan.n_steps(), rng, o), plan, grid);
  const Trajectory Y = shifted_process(ring, W, plan);
  std::vector<double> A, logs;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    A.push_back(plan.integrator(grid[i]));
    logs.push_back(std::log((Y.points[i] - W.points[i]).norm()));
  }
  for (std::size_t i = 1; i < A.size(); ++i) EXPECT_LT(logs[i], logs[i - 1]);
  EXPECT_LT((logs.back() - logs.front()) / (A.back() - A.front()), -0.5);
}

TEST(ConstrainedFlow, ZeroGradientIsConstant) {
  const Vec y0 = on_circle(0.9);
  const Trajectory tr = constrained_gradient_flow(ring_sine_loss(), [](const Vec&) { return Vec(Vec::Zero(2)); },
                                                  y0, 1.0);
  for (const Vec& p : tr.points) EXPECT_LT((p - y0).norm(), 1e-14);
}

TEST(ConstrainedFlow, RingAntiPgdAgainstAngularOde) {
  const SmoothLoss ring = ring_sine_loss();
  const RegFunctional reg = reg_anti_pgd(ring);
  const double th0 = 1.3;
  const Trajectory tr = constrained_gradient_flow(ring, reg.gradient, on_circle(th0), 3.0);
  // theta' = -dReg/dtheta on the unit circle.
  const VectorField f = [](const Vec& th) {
    const double t = th(0);
    return Vec(Vec::Constant(1, -0.7 * std::cos(5 * std::cos(t)) * (-5 * std::sin(t))));
  };
  const double ref = rk4_fixed(f, Vec::Constant(1, th0), 3.0, 1e-4)(0);
  const Vec end = tr.points.back();
  EXPECT_NEAR(std::atan2(end(1), end(0)), ref, 5e-3);
  double max_off = 0.0;
  for (const Vec& p : tr.points) max_off = std::max(max_off, std::abs(p.norm() - 1.0));
  EXPECT_LT(max_off, 1e-6);

  const Trajectory longrun = constrained_gradient_flow(ring, reg.gradient, on_circle(th0), 20.0);
  const Vec y = longrun.points.back();
  const double th = std::atan2(y(1), y(0));
  EXPECT_NEAR(std::cos(th), -std::numbers::pi / 10, 1e-4);
  EXPECT_NEAR(reg_on_circle(th), 0.3, 1e-6);
}

TEST(ConstrainedFlow, OffManifoldStartIsRejected) {
  const SmoothLoss ring = ring_sine_loss();
  EXPECT_THROW(constrained_gradient_flow(ring, reg_anti_pgd(ring).gradient, Vec{{0.0, 1.2}}, 1.0),
               OffManifoldError);
}

TEST(ConstrainedSde, ZeroPartsGiveAConstantPath) {
  DegenerateParts p;
  p.f = [](const Vec&) { return Vec(Vec::Zero(2)); };
  p.f_jac = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  Rng rng(10);
  const Vec y0 = on_circle(2.0);
  const Trajectory tr = constrained_sde(ring_sine_loss(), p, 1.0, y0, 0.5, rng);
  for (const Vec& q : tr.points) EXPECT_LT((q - y0).norm(), 1e-14);
  EXPECT_THROW(constrained_sde(ring_sine_loss(), DegenerateParts{}, 1.0, y0, 0.5, rng), SchemeError);
}

TEST(ConstrainedSde, LabelNoiseReducesToTheLaplacianFlow) {
  const int N = 8;
  const auto prob = make_interpolating_olm(N, 6, 7);
  const NoisyLoss s = label_noise(olm_predictor(6), prob.data);
  ConstrainedOptions o;
  o.dt = 1e-3;
  Rng rng(11);
  const Trajectory sde = constrained_sde(s.base, *s.parts, 1.0, prob.w_star, 1.0, rng, o);
  const Trajectory gf = constrained_gradient_flow(s.base, reg_label_noise(s.base, N).gradient, prob.w_star, 1.0, o);
  const double moved = (gf.points.back() - prob.w_star).norm();
  EXPECT_GT(moved, 0.05);
  EXPECT_LT((sde.points.back() - gf.points.back()).norm(), 1e-2 * moved);
}

TEST(ConstrainedSde, SgldAngularVarianceSlopeIsAQuarter) {
  const SmoothLoss ring = ring_sine_loss();
  const NoisyLoss s = sgld(ring);
  const double th0 = 1.0, T = 1.0;
  const int n_paths = 400;
  ConstrainedOptions o;
  o.dt = 5e-3;
  o.n_records = 2;
  std::vector<double> d(n_paths);
  for (int i = 0; i < n_paths; ++i) {
    Rng rng = Rng::substream(12, i);
    const Trajectory tr = constrained_sde(ring, *s.parts, 1.0, on_circle(th0), T, rng, o);
    const std::vector<double> a = unwrapped_angles(tr.points);
    d[i] = a.back() - th0;
  }
  double m = 0.0, v = 0.0;
  for (double x : d) m += x / n_paths;
  for (double x : d) v += (x - m) * (x - m) / (n_paths - 1);
  EXPECT_NEAR(v / T, 0.25, 0.25 * 0.25);
}

TEST(Annotate, DiagnosticsAndUnwrappedArclength) {
  const SmoothLoss ring = ring_sine_loss();
  Trajectory tr;
  for (int k = 0; k <= 300; ++k) tr.push(k, on_circle(6 * std::numbers::pi * k / 300.0));
  DiagnosticOptions o;
  o.arclength = true;
  annotate(tr, ring, o);
  ASSERT_EQ(tr.arclength.size(), tr.size());
  for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LT(std::abs(tr.arclength[i] - tr.arclength[i - 1]), 0.1);
  EXPECT_NEAR(tr.arclength.back() - tr.arclength.front(), 6 * std::numbers::pi, 1e-9);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_LT(tr.loss[i], 1e-24);
    EXPECT_LT(tr.grad_norm[i], 1e-10);
  }
  Trajectory q;
  q.push(0, Vec::Ones(3));
  EXPECT_THROW(annotate(q, quadratic_loss(Mat::Identity(3, 3)), o), ConfigError);
}

}  // namespace
}  // namespace nglab
