#include "nglab/finite_diff.hpp"
#include "nglab/regularizers.hpp"
#include "nglab/schemes.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

namespace nglab {
namespace {

using test::random_vec;

struct Fixture {
  InterpolatingProblem olm = make_interpolating_olm(3, 4, 5);
  InterpolatingProblem shallow = make_interpolating_shallow(4, 3, 3, 24);
  Dataset deep_data;
  Fixture() {
    Rng rng(31);
    deep_data = {rng.normal_vec(12).reshaped(4, 3), rng.normal_vec(4)};
  }
};

// Every scheme, with the loss it is built on.
std::vector<NoisyLoss> all_schemes(const Fixture& fx) {
  const SmoothLoss ring = ring_sine_loss();
  const Predictor olm = olm_predictor(4);
  return {drop_connect(ring, NoiseKind::gaussian),
          drop_connect(ring, NoiseKind::bernoulli_dropout),
          anti_pgd(ring),
          sgld(ring),
          label_noise(olm, fx.olm.data),
          minibatch(olm, fx.olm.data, 2),
          label_plus_minibatch(olm, fx.olm.data),
          dropout_olm(4, fx.olm.data),
          dropout_shallow(3, 3, fx.shallow.data),
          dropout_deep({3, 3, 2, 1}, fx.deep_data),
          cosine_modulated_quadratic(ring),
          norm_linear(ring)};
}

TEST(Consistency, ZeroNoiseReproducesTheBaseLossExactly) {
  const Fixture fx;
  Rng rng(1);
  for (const NoisyLoss& s : all_schemes(fx)) {
    for (int k = 0; k < 100; ++k) {
      const Vec w = random_vec(rng, s.base.dim);
      ASSERT_EQ(s.value(w, Vec::Zero(s.noise_dim)), s.base.value(w)) << s.id;
    }
  }
}

TEST(Consistency, GradWMatchesFiniteDifferences) {
  const Fixture fx;
  Rng rng(2);
  for (const NoisyLoss& s : all_schemes(fx)) {
    for (int k = 0; k < 20; ++k) {
      const Vec w = random_vec(rng, s.base.dim, 0.8);
      const Vec eta = random_vec(rng, s.noise_dim, 0.3);
      const Vec g = s.grad_w(w, eta);
      const Vec g_fd = fd::gradient([&](const Vec& v) { return s.value(v, eta); }, w);
      EXPECT_LT((g - g_fd).norm(), 1e-4 * std::max(1.0, g_fd.norm())) << s.id;
    }
  }
}

TEST(Consistency, DegenerateSchemesAreQuadraticInEta) {
  // value - g is at most bilinear in eta: third differences vanish along
  // random directions. g may hold higher powers of eta (label + minibatch).
  const Fixture fx;
  Rng rng(3);
  for (const NoisyLoss& s : all_schemes(fx)) {
    if (s.degenerate_class != DegenerateClass::degenerate_quadratic) continue;
    ASSERT_TRUE(s.parts.has_value()) << s.id;
    for (int k = 0; k < 10; ++k) {
      const Vec w = random_vec(rng, s.base.dim);
      const Vec e = random_vec(rng, s.noise_dim);
      const double h = 0.1;
      const DegenerateParts& p = *s.parts;
      auto v = [&](double t) {
        const Vec te = t * e;
        return s.value(w, te) - (p.g ? p.g(te) : 0.0);
      };
      const double d3 = v(2 * h) - 2 * v(h) + 2 * v(-h) - v(-2 * h);
      EXPECT_LT(std::abs(d3) / (2 * h * h * h), 1e-8 * std::max(1.0, std::abs(v(0)))) << s.id;
      // Reconstruction from the parts.
      double rebuilt = s.base.value(w) + p.f(w).dot(e);
      if (p.H) {
        const Mat H = p.H(w);
        EXPECT_LT(H.diagonal().cwiseAbs().maxCoeff(), 1e-15) << s.id;
        rebuilt += 0.5 * e.dot(H * e);
      }
      if (p.g) rebuilt += p.g(e);
      EXPECT_NEAR(s.value(w, e), rebuilt, 1e-12 * std::max(1.0, std::abs(rebuilt))) << s.id;
      if (p.g) {
        EXPECT_EQ(p.g(Vec::Zero(s.noise_dim)), 0.0);
      }
    }
  }
}

TEST(DropConnect, Examples) {
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss s = drop_connect(L);
  EXPECT_EQ(s.noise_dim, 2);
  EXPECT_EQ(s.degenerate_class, DegenerateClass::nondegenerate);
  EXPECT_DOUBLE_EQ(s.value(Vec{{0.3, 0.9}}, Vec::Constant(2, -1.0)), L.value(Vec::Zero(2)));
  EXPECT_NEAR(s.value(Vec{{0.0, 1.0}}, Vec{{0.0, 1.0}}), 0.36, 1e-15);
}

TEST(AntiPgd, Examples) {
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss s = anti_pgd(L);
  const Vec top{{0.0, 1.0}};
  EXPECT_DOUBLE_EQ(s.value(top, Vec{{0.0, -1.0}}), 1.0);
  ASSERT_TRUE(static_cast<bool>(s.analytic_reg));
  EXPECT_NEAR(s.analytic_reg(top), 1.0, 1e-12);
  EXPECT_NEAR(0.5 * fd::laplacian(L.value, top, 1e-4), 1.0, 1e-6);
}

TEST(Sgld, Examples) {
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss s = sgld(L);
  EXPECT_EQ(s.degenerate_class, DegenerateClass::degenerate_quadratic);
  const Vec w{{2.0, 0.0}}, eta{{1.0, 1.0}};
  EXPECT_DOUBLE_EQ(s.value(w, eta), L.value(w) + 1.0);
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Vec v = rng.normal_vec(2), e = rng.normal_vec(2);
    EXPECT_EQ(s.grad_w(v, e), L.gradient(v) + 0.5 * e);
  }
  EXPECT_EQ(s.parts->f(w), 0.5 * w);
}

TEST(LabelNoise, OnManifoldValueIsPureNoise) {
  const auto prob = make_interpolating_olm(5, 3, 2);
  const NoisyLoss s = label_noise(olm_predictor(3), prob.data);
  EXPECT_EQ(s.noise_dim, 5);
  Rng rng(5);
  const Vec eta = rng.normal_vec(5);
  EXPECT_NEAR(s.value(prob.w_star, eta), eta.squaredNorm() / 5, 1e-15);
}

TEST(LabelNoise, NoiseCoefficientJacobianOnManifold) {
  const auto prob = make_interpolating_olm(5, 3, 2);
  const Predictor pred = olm_predictor(3);
  const NoisyLoss s = label_noise(pred, prob.data);
  const Mat J = s.parts->f_jac(prob.w_star);
  const Mat J_fd = fd::jacobian(s.parts->f, prob.w_star);
  EXPECT_LT((J - J_fd).norm(), 1e-8);
  for (int i = 0; i < 5; ++i)
    EXPECT_LT((J.row(i).transpose() + (2.0 / 5) * pred.grad_w(prob.w_star, prob.data.input(i))).norm(), 1e-14);
}

TEST(Minibatch, Examples) {
  const auto prob = make_interpolating_olm(6, 3, 3);
  const Predictor pred = olm_predictor(3);
  const NoisyLoss s = minibatch(pred, prob.data, 3);
  ASSERT_TRUE(s.builtin_noise.has_value());
  EXPECT_DOUBLE_EQ(s.builtin_noise->variances()(0), 1.0);
  Rng rng(6);
  const Vec w = rng.normal_vec(6);
  EXPECT_EQ(s.value(w, Vec::Constant(6, -1.0)), 0.0);
  EXPECT_EQ(s.grad_w(w, Vec::Constant(6, -1.0)).norm(), 0.0);
  EXPECT_LT(s.parts->f(prob.w_star).norm(), 1e-28);
  EXPECT_LT(s.parts->f_jac(prob.w_star).norm(), 1e-14);
  EXPECT_THROW(minibatch(pred, prob.data, 0), ConfigError);
  EXPECT_THROW(minibatch(pred, prob.data, 7), ConfigError);
}

TEST(Minibatch, FullBatchIsDeterministic) {
  const auto prob = make_interpolating_olm(6, 3, 3);
  const NoisyLoss s = minibatch(olm_predictor(3), prob.data, 6);
  Rng rng(7);
  const Vec w = rng.normal_vec(6);
  for (int k = 0; k < 20; ++k) {
    const Vec eta = sample(*s.builtin_noise, rng);
    EXPECT_EQ(s.value(w, eta), s.base.value(w));
  }
}

TEST(LabelPlusMinibatch, Examples) {
  const auto prob = make_interpolating_olm(4, 3, 4);
  const NoisyLoss s = label_plus_minibatch(olm_predictor(3), prob.data);
  EXPECT_EQ(s.noise_dim, 8);
  Rng rng(8);
  Vec eta = Vec::Zero(8);
  eta.tail(4) = rng.normal_vec(4);
  EXPECT_EQ(s.value(prob.w_star, eta), 0.0);
  // Mixed eta / eta~ second differences vanish on the manifold.
  const double h = 1e-3;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      auto v = [&](double a, double b) {
        Vec e = Vec::Zero(8);
        e(i) += a;
        e(4 + j) += b;
        return s.value(prob.w_star, e);
      };
      const double mixed = (v(h, h) - v(h, -h) - v(-h, h) + v(-h, -h)) / (4 * h * h);
      EXPECT_NEAR(mixed, 0.0, 1e-9);
    }
  }
  // Off the manifold the cross entries are -(2/N) times the residual.
  const Vec w = rng.normal_vec(6);
  const Vec r = residuals(olm_predictor(3), prob.data, w);
  const Mat H = s.parts->H(w);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(H(i, 4 + i), -(2.0 / 4) * r(i), 1e-12);
}

TEST(DropoutOlm, Examples) {
  Rng rng(9);
  Dataset d{rng.normal_vec(12).reshaped(3, 4), rng.normal_vec(3)};
  const NoisyLoss s = dropout_olm(4, d);
  Vec w(8);
  const Vec u = rng.normal_vec(4);
  w << u, u;
  for (int k = 0; k < 5; ++k)
    EXPECT_NEAR(s.value(w, rng.normal_vec(4)), d.labels.squaredNorm() / 3, 1e-14);
  for (int k = 0; k < 10; ++k) {
    const Vec v = rng.normal_vec(8);
    EXPECT_NEAR(s.analytic_reg(v), numeric_reg_value(s, v), 1e-6 * std::max(1.0, s.analytic_reg(v)));
  }
}

TEST(DropoutShallow, Examples) {
  Rng rng(10);
  Dataset d{rng.normal_vec(6).reshaped(3, 2), rng.normal_vec(3)};
  const NoisyLoss s = dropout_shallow(3, 2, d);
  EXPECT_EQ(s.noise_dim, 3);
  Vec w = rng.normal_vec(9);
  w.head(3).setZero();
  for (int k = 0; k < 5; ++k)
    EXPECT_NEAR(s.value(w, rng.normal_vec(3)), d.labels.squaredNorm() / 3, 1e-14);
  for (int k = 0; k < 10; ++k) {
    const Vec v = rng.normal_vec(9);
    EXPECT_NEAR(s.analytic_reg(v), numeric_reg_value(s, v), 1e-6 * std::max(1.0, s.analytic_reg(v)));
  }
}

TEST(DropoutDeep, OneHiddenLayerMatchesShallow) {
  const int n = 3, d = 2;
  Rng rng(11);
  Dataset data{rng.normal_vec(8).reshaped(4, 2), rng.normal_vec(4)};
  const NoisyLoss deep = dropout_deep({d, n, 1}, data, {2});
  const NoisyLoss shallow = dropout_shallow(n, d, data);
  ASSERT_EQ(deep.noise_dim, n);
  for (int k = 0; k < 20; ++k) {
    const Vec ws = rng.normal_vec(n * (d + 1)), eta = rng.normal_vec(n);
    const Vec wd = shallow_to_deep_params(ws, n, d);
    EXPECT_NEAR(deep.value(wd, eta), shallow.value(ws, eta), 1e-12);
  }
}

TEST(DropoutDeep, NumericRegIsFiniteAndNonnegativeOnManifold) {
  const auto prob = make_interpolating_shallow(4, 3, 3, 24);
  const NoisyLoss s = dropout_deep({3, 3, 1}, prob.data);
  EXPECT_EQ(s.noise_dim, 3 + 3);  // inputs of both layers
  EXPECT_FALSE(static_cast<bool>(s.analytic_reg));
  const Vec w = shallow_to_deep_params(prob.w_star, 3, 3);
  EXPECT_LT(s.base.value(w), 1e-24);
  const double r = numeric_reg_value(s, w);
  EXPECT_TRUE(std::isfinite(r));
  EXPECT_GE(r, 0.0);
  EXPECT_THROW(dropout_deep({3, 3, 1}, prob.data, {3}), ConfigError);
}

TEST(Modulated, RegIsHalfTheModulation) {
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss s = cosine_modulated_quadratic(L);
  Rng rng(12);
  for (int k = 0; k < 10; ++k) {
    const Vec w = rng.normal_vec(2);
    EXPECT_NEAR(s.analytic_reg(w), 0.5 * (1 - 0.7 * std::cos(2 * w(0))), 1e-14);
    EXPECT_NEAR(numeric_reg_value(s, w), s.analytic_reg(w), 1e-8);
  }
  EXPECT_EQ(norm_linear(L).degenerate_class, DegenerateClass::degenerate_quadratic);
}

TEST(SchemeIds, RoundTrip) {
  for (SchemeTag t : {SchemeTag::drop_connect, SchemeTag::anti_pgd, SchemeTag::sgld, SchemeTag::label_noise,
                      SchemeTag::minibatch, SchemeTag::label_plus_minibatch, SchemeTag::dropout_olm,
                      SchemeTag::dropout_shallow, SchemeTag::dropout_deep})
    EXPECT_EQ(scheme_tag_from_string(to_string(t)), t);
  EXPECT_THROW(scheme_tag_from_string("adam"), ConfigError);
}

}  // namespace
}  // namespace nglab
