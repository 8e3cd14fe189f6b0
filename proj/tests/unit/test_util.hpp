#pragma once

#include "nglab/finite_diff.hpp"
#include "nglab/losses.hpp"
#include "nglab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace nglab::test {

inline Vec random_vec(Rng& rng, int n, double scale = 1.0) { return scale * rng.normal_vec(n); }

inline double rel_err(const Vec& got, const Vec& want) {
  return (got - want).norm() / std::max(1e-12, want.norm());
}

inline double rel_err(const Mat& got, const Mat& want) {
  return (got - want).norm() / std::max(1e-12, want.norm());
}

// Point on the zero set of the ring loss.
inline Vec on_circle(double theta) { return Vec{{std::cos(theta), std::sin(theta)}}; }

// Gradient and Hessian finite-difference checks at one point. The oracle
// Hessian comes from differences of the analytic gradient, which keeps the
// truncation error at O(h^2) with h = 1e-5.
inline void expect_derivatives_match(const SmoothLoss& L, const Vec& w, double tol = 1e-4) {
  const Vec g = L.gradient(w);
  const Vec g_fd = fd::gradient(L.value, w);
  EXPECT_LT((g - g_fd).norm(), tol * std::max(1.0, g_fd.norm())) << "gradient at " << w.transpose();
  const Mat H = L.hessian(w);
  const Mat H_fd = fd::hessian_from_gradient(L.gradient, w);
  EXPECT_LT((H - H_fd).norm(), tol * std::max(1.0, H_fd.norm())) << "hessian at " << w.transpose();
}

}  // namespace nglab::test
