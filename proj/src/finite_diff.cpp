#include "nglab/finite_diff.hpp"

namespace nglab::fd {

Vec gradient(const ScalarFn& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Mat hessian(const ScalarFn& f, const Vec& x, double h) {
  const Eigen::Index n = x.size();
  Mat H(n, n);
  const double f0 = f(x);
  Vec xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      xp(i) = x(i) + h;
      xp(j) = x(j) + h;
      const double fpp = f(xp);
      xp(j) = x(j) - h;
      const double fpm = f(xp);
      xp(i) = x(i) - h;
      const double fmm = f(xp);
      xp(j) = x(j) + h;
      const double fmp = f(xp);
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return H;
}

Mat jacobian(const VectorFn& F, const Vec& x, double h) {
  Vec xp = x;
  Mat J;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    const Vec fp = F(xp);
    xp(j) = x(j) - h;
    const Vec fm = F(xp);
    xp(j) = x(j);
    if (j == 0) J.resize(fp.size(), x.size());
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

Mat hessian_from_gradient(const VectorFn& grad, const Vec& x, double h) {
  Mat J = jacobian(grad, x, h);
  return 0.5 * (J + J.transpose());
}

double laplacian(const ScalarFn& f, const Vec& x, double h) {
  const double f0 = f(x);
  double acc = 0.0;
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    acc += fp + fm - 2.0 * f0;
  }
  return acc / (h * h);
}

}  // namespace nglab::fd
