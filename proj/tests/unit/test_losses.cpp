#include "nglab/finite_diff.hpp"
#include "nglab/losses.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <numbers>

namespace nglab {
namespace {

using test::on_circle;
using test::random_vec;

TEST(RingSine, ValuesAtExamplePoints) {
  const SmoothLoss L = ring_sine_loss();
  EXPECT_EQ(L.dim, 2);
  EXPECT_EQ(L.value(Vec{{0.0, 1.0}}), 0.0);
  EXPECT_DOUBLE_EQ(L.value(Vec{{0.0, 0.0}}), 1.0);
}

TEST(RingSine, HessianEigenvaluesOnCircleMatchFiniteDifferences) {
  const SmoothLoss L = ring_sine_loss();
  const Vec w{{0.0, 1.0}};
  const Mat H_fd = fd::hessian(L.value, w);
  Eigen::SelfAdjointEigenSolver<Mat> es(H_fd);
  EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-5);
  EXPECT_NEAR(es.eigenvalues()(1), 2.0, 1e-5);
  Eigen::SelfAdjointEigenSolver<Mat> exact(L.hessian(w));
  EXPECT_NEAR(exact.eigenvalues()(0), 0.0, 1e-12);
  EXPECT_NEAR(exact.eigenvalues()(1), 2.0, 1e-12);
}

TEST(RingSine, ZeroSetIsTheUnitCircle) {
  const SmoothLoss L = ring_sine_loss();
  for (int k = 0; k < 64; ++k) {
    const Vec w = on_circle(2.0 * std::numbers::pi * k / 64.0);
    EXPECT_LT(L.value(w), 1e-24);
    EXPECT_LT(L.gradient(w).norm(), 1e-10);
  }
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Vec w = random_vec(rng, 2, 1.5);
    if (std::abs(w.norm() - 1.0) > 1e-6) {
      EXPECT_GT(L.value(w), 0.0);
    }
  }
}

TEST(RingSine, ValueNonnegativeAndDerivativesMatchAtRandomPoints) {
  const SmoothLoss L = ring_sine_loss();
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const Vec w = random_vec(rng, 2, 1.2);
    EXPECT_GE(L.value(w), 0.0);
    test::expect_derivatives_match(L, w);
    const Mat H = L.hessian(w);
    EXPECT_LE((H - H.transpose()).norm(), 1e-12 * std::max(1.0, H.norm()));
  }
}

TEST(Mse, SingleSampleLinearPredictor) {
  Predictor lin;
  lin.dim_w = 1;
  lin.dim_in = 1;
  lin.predict = [](const Vec& w, const Vec& x) { return w.dot(x); };
  lin.grad_w = [](const Vec&, const Vec& x) { return x; };
  Dataset d{Mat::Constant(1, 1, 1.0), Vec::Zero(1)};
  const SmoothLoss L = mse_empirical_loss(lin, d);
  EXPECT_DOUBLE_EQ(L.value(Vec::Constant(1, 2.0)), 4.0);
}

TEST(Mse, InterpolatingParametersHaveZeroLossAndGradient) {
  const auto prob = make_interpolating_olm(8, 6, 7);
  const SmoothLoss L = mse_empirical_loss(olm_predictor(6), prob.data);
  EXPECT_LT(L.value(prob.w_star), 1e-28);
  EXPECT_LT(L.gradient(prob.w_star).norm(), 1e-14);
  EXPECT_LT(residuals(olm_predictor(6), prob.data, prob.w_star).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mse, OlmGradientMatchesFiniteDifferences) {
  Rng rng(5);
  Dataset d{rng.normal_vec(20).reshaped(5, 4), rng.normal_vec(5)};
  const SmoothLoss L = mse_empirical_loss(olm_predictor(4), d);
  for (int k = 0; k < 10; ++k) {
    const Vec w = random_vec(rng, 8);
    EXPECT_LT((L.gradient(w) - fd::gradient(L.value, w, 1e-5)).norm(), 1e-6 * std::max(1.0, L.gradient(w).norm()));
  }
}

TEST(Mse, DimensionMismatchIsAConfigError) {
  Dataset d{Mat::Ones(3, 2), Vec::Zero(3)};
  EXPECT_THROW(mse_empirical_loss(olm_predictor(3), d), ConfigError);
}

TEST(Mse, DerivativesMatchForEveryPredictorFamily) {
  Rng rng(21);
  Dataset d{rng.normal_vec(12).reshaped(4, 3), rng.normal_vec(4)};
  const SmoothLoss olm = mse_empirical_loss(olm_predictor(3), d);
  const SmoothLoss shallow = mse_empirical_loss(shallow_nn_predictor(2, 3), d);
  const SmoothLoss deep = mse_empirical_loss(deep_nn_predictor({3, 3, 2, 1}), d);
  for (int k = 0; k < 100; ++k) {
    for (const SmoothLoss* L : {&olm, &shallow, &deep}) {
      const Vec w = random_vec(rng, L->dim, 0.8);
      EXPECT_GE(L->value(w), 0.0);
      test::expect_derivatives_match(*L, w);
    }
  }
}

TEST(Dataset, CsvRoundTrip) {
  Rng rng(2);
  Dataset d{rng.normal_vec(6).reshaped(3, 2), rng.normal_vec(3)};
  const auto path = std::filesystem::temp_directory_path() / "nglab_dataset_roundtrip.csv";
  save_dataset_csv(d, path);
  const Dataset back = load_dataset_csv(path);
  EXPECT_EQ(back.inputs, d.inputs);
  EXPECT_EQ(back.labels, d.labels);
  std::filesystem::remove(path);
}

TEST(Dataset, ValidationRejectsBadData) {
  EXPECT_THROW((Dataset{Mat(0, 2), Vec(0)}.validate()), ConfigError);
  EXPECT_THROW((Dataset{Mat::Ones(3, 2), Vec::Zero(2)}.validate()), ConfigError);
  Dataset nan{Mat::Ones(2, 2), Vec::Zero(2)};
  nan.inputs(0, 0) = std::nan("");
  EXPECT_THROW(nan.validate(), ConfigError);
  EXPECT_THROW(load_dataset_csv("/nonexistent/data.csv"), ConfigError);
}

TEST(Olm, Examples) {
  const Predictor p = olm_predictor(1);
  EXPECT_EQ(p.dim_w, 2);
  EXPECT_DOUBLE_EQ(p.predict(Vec{{2.0, 1.0}}, Vec{{3.0}}), 9.0);
  const Predictor p3 = olm_predictor(3);
  Rng rng(4);
  const Vec u = rng.normal_vec(3);
  Vec w(6);
  w << u, u;
  for (int k = 0; k < 5; ++k) EXPECT_EQ(p3.predict(w, rng.normal_vec(3)), 0.0);
}

TEST(Olm, GradientMatchesFiniteDifferences) {
  const Predictor p = olm_predictor(4);
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const Vec w = rng.normal_vec(8), x = rng.normal_vec(4);
    const Vec fdg = fd::gradient([&](const Vec& v) { return p.predict(v, x); }, w);
    EXPECT_LT((p.grad_w(w, x) - fdg).norm(), 1e-6);
  }
}

TEST(SmoothRelu, Examples) {
  EXPECT_EQ(smooth_relu(-1.0), 0.0);
  EXPECT_NEAR(smooth_relu(1.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(smooth_relu(1.0), 0.367879, 1e-6);
  EXPECT_EQ(smooth_relu_d1(0.0), 0.0);
  EXPECT_EQ(smooth_relu_d2(0.0), 0.0);
  const double x = 1e-3, h = 1e-7;
  const double fd1 = (smooth_relu(x + h) - smooth_relu(x - h)) / (2 * h);
  EXPECT_NEAR(fd1, smooth_relu_d1(x), 1e-8);
}

TEST(SmoothRelu, DerivativesAndUnderflow) {
  for (double x : {0.05, 0.3, 1.0, 4.0}) {
    const double h = 1e-5;
    EXPECT_NEAR(smooth_relu_d1(x), std::exp(-1.0 / x) * (1.0 + 1.0 / x), 1e-14);
    EXPECT_NEAR((smooth_relu_d1(x + h) - smooth_relu_d1(x - h)) / (2 * h), smooth_relu_d2(x), 1e-6);
  }
  for (double x : {1e-300, 1e-10, 1.0 / 800.0, 1.0 / 745.0}) {
    EXPECT_TRUE(std::isfinite(smooth_relu(x)));
    EXPECT_TRUE(std::isfinite(smooth_relu_d1(x)));
    EXPECT_TRUE(std::isfinite(smooth_relu_d2(x)));
    EXPECT_GE(smooth_relu(x), 0.0);
  }
}

TEST(Shallow, Examples) {
  const Predictor p = shallow_nn_predictor(1, 1);
  EXPECT_EQ(p.dim_w, 2);
  EXPECT_NEAR(p.predict(Vec{{1.0, 1.0}}, Vec{{1.0}}), std::exp(-1.0), 1e-15);
  const Predictor p3 = shallow_nn_predictor(3, 2);
  EXPECT_EQ(p3.dim_w, 9);
  Rng rng(1);
  Vec w = rng.normal_vec(9);
  w.head(3).setZero();
  EXPECT_EQ(p3.predict(w, rng.normal_vec(2)), 0.0);
}

TEST(Shallow, GradientMatchesFiniteDifferences) {
  const Predictor p = shallow_nn_predictor(3, 2);
  Rng rng(9);
  for (int k = 0; k < 20; ++k) {
    const Vec w = rng.normal_vec(9), x = rng.normal_vec(2);
    const Vec fdg = fd::gradient([&](const Vec& v) { return p.predict(v, x); }, w);
    EXPECT_LT((p.grad_w(w, x) - fdg).norm(), 1e-6);
  }
}

TEST(Deep, ZeroParametersGiveZero) {
  const Predictor p = deep_nn_predictor({3, 4, 2, 1});
  Rng rng(1);
  EXPECT_EQ(p.predict(Vec::Zero(p.dim_w), rng.normal_vec(3)), 0.0);
}

TEST(Deep, OneHiddenLayerEqualsShallow) {
  const int n = 3, d = 2;
  const Predictor deep = deep_nn_predictor({d, n, 1});
  const Predictor shallow = shallow_nn_predictor(n, d);
  Rng rng(12);
  for (int k = 0; k < 20; ++k) {
    const Vec ws = rng.normal_vec(n * (d + 1)), x = rng.normal_vec(d);
    EXPECT_NEAR(deep.predict(shallow_to_deep_params(ws, n, d), x), shallow.predict(ws, x), 1e-12);
  }
}

TEST(Deep, GradientMatchesFiniteDifferences) {
  const Predictor p = deep_nn_predictor({3, 4, 2, 1});
  Rng rng(13);
  for (int k = 0; k < 20; ++k) {
    const Vec w = rng.normal_vec(p.dim_w), x = rng.normal_vec(3);
    const Vec fdg = fd::gradient([&](const Vec& v) { return p.predict(v, x); }, w);
    EXPECT_LT((p.grad_w(w, x) - fdg).norm(), 1e-5);
  }
}

TEST(Deep, LayoutRejectsBadDims) {
  EXPECT_THROW(DeepLayout({3}), ConfigError);
  EXPECT_THROW(DeepLayout({3, 2}), ConfigError);
  EXPECT_THROW(DeepLayout({3, 0, 1}), ConfigError);
}

TEST(FdLoss, FallbackDerivativesAreAccurate) {
  const SmoothLoss exact = ring_sine_loss();
  const SmoothLoss fdl = make_fd_loss(2, exact.value);
  EXPECT_EQ(fdl.mode, DerivativeMode::finite_difference);
  const Vec w{{0.4, 0.7}};
  EXPECT_LT(test::rel_err(fdl.gradient(w), exact.gradient(w)), 1e-8);
  EXPECT_LT(test::rel_err(fdl.hessian(w), exact.hessian(w)), 1e-4);
}

TEST(Quadratic, ValueAndDerivatives) {
  Mat A(2, 2);
  A << 2.0, 0.5, 0.5, 1.0;
  const SmoothLoss L = quadratic_loss(A);
  const Vec w{{1.0, -2.0}};
  EXPECT_DOUBLE_EQ(L.value(w), 0.5 * w.dot(A * w));
  EXPECT_EQ(L.gradient(w), A * w);
  EXPECT_EQ(L.hessian(w), A);
}

}  // namespace
}  // namespace nglab
