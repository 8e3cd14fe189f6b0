#include "nglab/manifold.hpp"

#include <cmath>

namespace nglab {

SpectralSplit spectral_split(const Mat& H, double delta) {
  const Mat S = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  if (es.info() != Eigen::Success) throw NumericError("eigen-decomposition failed");
  const Eigen::Index n = S.rows();
  SpectralSplit out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  // Eigen sorts ascending; store descending.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = es.eigenvalues()(n - 1 - i);
    out.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  const double lmax = n > 0 ? std::max(out.eigenvalues(0), 0.0) : 0.0;
  out.delta = delta > 0.0 ? delta : std::max(1e-3 * lmax, 1e-12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = out.eigenvalues(i);
    if (l > out.delta) ++out.rank;
    if (l >= 0.5 * out.delta && l <= 2.0 * out.delta) out.ambiguous_gap = true;
  }
  return out;
}

ProjectorPair projectors(const SpectralSplit& split) {
  const Eigen::Index n = split.eigenvectors.rows();
  const Mat& V = split.eigenvectors;
  Mat Q = V.leftCols(split.rank) * V.leftCols(split.rank).transpose();
  ProjectorPair pp;
  pp.Q = Q;
  pp.P = Mat::Identity(n, n) - Q;
  return pp;
}

ProjectorPair tangent_projector(const SmoothLoss& L, const Vec& w, double delta,
                                double tol_grad) {
  const double g = L.gradient(w).norm();
  if (!(g < tol_grad))
    throw OffManifoldError("tangent_projector: |grad L| = " + std::to_string(g) +
                           " exceeds tolerance");
  return projectors(spectral_split(L.hessian(w), delta));
}

Mat pseudo_inverse(const SpectralSplit& split) {
  const Mat& V = split.eigenvectors;
  const Eigen::Index n = V.rows();
  Mat out = Mat::Zero(n, n);
  for (int i = 0; i < split.rank; ++i)
    out += V.col(i) * V.col(i).transpose() / split.eigenvalues(i);
  return out;
}

Mat lyapunov_pseudo_solve(const SpectralSplit& split, const Mat& S) {
  const Mat& V = split.eigenvectors;
  const Mat St = V.transpose() * S * V;
  Mat X = Mat::Zero(St.rows(), St.cols());
  for (Eigen::Index i = 0; i < St.rows(); ++i)
    for (Eigen::Index j = 0; j < St.cols(); ++j) {
      const double s = split.eigenvalues(i) + split.eigenvalues(j);
      if (s > split.delta) X(i, j) = St(i, j) / s;
    }
  return V * X * V.transpose();
}

double log_pseudo_determinant(const Mat& H, double delta) {
  const SpectralSplit s = spectral_split(H, delta);
  double acc = 0.0;
  for (int i = 0; i < s.rank; ++i) acc += std::log(s.eigenvalues(i));
  return acc;
}

Vec pseudo_determinant_log_grad(const SmoothLoss& L, const Vec& w, double delta, double h) {
  const SpectralSplit center = spectral_split(L.hessian(w), delta);
  const double d = center.delta;
  Vec g(w.size());
  Vec xp = w;
  for (Eigen::Index a = 0; a < w.size(); ++a) {
    xp(a) = w(a) + h;
    const SpectralSplit sp = spectral_split(L.hessian(xp), d);
    xp(a) = w(a) - h;
    const SpectralSplit sm = spectral_split(L.hessian(xp), d);
    xp(a) = w(a);
    if (sp.rank != center.rank || sm.rank != center.rank)
      throw AmbiguousGapError("pseudo-determinant: eigenvalue crosses delta along the stencil");
    double lp = 0.0, lm = 0.0;
    for (int i = 0; i < center.rank; ++i) {
      lp += std::log(sp.eigenvalues(i));
      lm += std::log(sm.eigenvalues(i));
    }
    g(a) = (lp - lm) / (2.0 * h);
  }
  return projectors(center).P * g;
}

Vec ThirdDerivative::contract(const Mat& M) const {
  const auto m = static_cast<Eigen::Index>(slices.size());
  Vec out = Vec::Zero(m);
  for (Eigen::Index a = 0; a < m; ++a) out += slices[a] * M.row(a).transpose();
  return out;
}

Vec ThirdDerivative::laplacian_gradient() const {
  Vec out(static_cast<Eigen::Index>(slices.size()));
  for (std::size_t a = 0; a < slices.size(); ++a) out(static_cast<Eigen::Index>(a)) = slices[a].trace();
  return out;
}

ThirdDerivative third_derivative(const SmoothLoss& L, const Vec& w, double h) {
  ThirdDerivative T;
  T.slices.reserve(w.size());
  Vec xp = w;
  for (Eigen::Index a = 0; a < w.size(); ++a) {
    xp(a) = w(a) + h;
    const Mat Hp = L.hessian(xp);
    xp(a) = w(a) - h;
    const Mat Hm = L.hessian(xp);
    xp(a) = w(a);
    T.slices.push_back((Hp - Hm) / (2.0 * h));
  }
  return T;
}

PhiResult limit_map_phi_ex(const SmoothLoss& L, const Vec& x0, const PhiOptions& opts) {
  if (x0.size() != L.dim) throw ConfigError("limit_map_phi: dimension mismatch");
  PhiResult res;
  Vec x = x0;
  double t = 0.0;
  double g = L.gradient(x).norm();
  if (g >= opts.tol_grad) {
    AdaptiveRk4 rk([&L](const Vec& y) { return Vec(-L.gradient(y)); }, opts.ode);
    double last = L.value(x);
    bool rising = false;
    rk.advance(x, t, opts.t_max, [&](double, const Vec& y) {
      const double v = L.value(y);
      if (v > last + 1e-12 * (1.0 + std::abs(last))) rising = true;
      last = v;
      g = L.gradient(y).norm();
      return rising || g < opts.tol_grad;
    });
    if (rising) throw NotAttractedError("limit_map_phi: loss increased along the flow");
    if (!(g < opts.tol_grad)) throw NotAttractedError("limit_map_phi: flow did not converge by t_max");
  }
  // one normal Newton correction
  const SpectralSplit s = spectral_split(L.hessian(x), opts.delta);
  const ProjectorPair pp = projectors(s);
  x -= pp.Q * (pseudo_inverse(s) * L.gradient(x));
  res.point = x;
  res.flow_time = t;
  res.final_grad_norm = L.gradient(x).norm();
  return res;
}

Vec limit_map_phi(const SmoothLoss& L, const Vec& x0, const PhiOptions& opts) {
  return limit_map_phi_ex(L, x0, opts).point;
}

Vec phi_second_derivative(const SpectralSplit& split, const ThirdDerivative& T,
                          const Mat& Sigma) {
  const ProjectorPair pp = projectors(split);
  const Mat S = 0.5 * (Sigma + Sigma.transpose());
  const Mat Hd = pseudo_inverse(split);
  const Vec t1 = Hd * T.contract(pp.P * S * pp.P);
  const Vec t2 = pp.P * T.contract(lyapunov_pseudo_solve(split, pp.Q * S * pp.Q));
  const Vec t3 = pp.P * T.contract(Hd * pp.Q * S * pp.P);
  return -t1 - t2 - 2.0 * t3;
}

Vec phi_second_derivative(const SmoothLoss& L, const Vec& w, const Mat& Sigma, double delta) {
  const SpectralSplit split = spectral_split(L.hessian(w), delta);
  return phi_second_derivative(split, third_derivative(L, w), Sigma);
}

IdentityTerms phi_second_derivative_identity(const SmoothLoss& L, const Vec& w, double delta) {
  const SpectralSplit split = spectral_split(L.hessian(w), delta);
  const ProjectorPair pp = projectors(split);
  const ThirdDerivative T = third_derivative(L, w);
  IdentityTerms out;
  out.normal_term = pseudo_inverse(split) * T.contract(pp.P);
  out.log_det_grad = pseudo_determinant_log_grad(L, w, split.delta);
  return out;
}

Vec phi_second_derivative_hessian(const SmoothLoss& L, const Vec& w, double delta) {
  const ProjectorPair pp = projectors(spectral_split(L.hessian(w), delta));
  return -0.5 * pp.P * third_derivative(L, w).laplacian_gradient();
}

Vec phi_laplacian_fd(const SmoothLoss& L, const Vec& w, double h, const PhiOptions& opts) {
  const Vec c = limit_map_phi(L, w, opts);
  Vec acc = Vec::Zero(w.size());
  Vec xp = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    xp(i) = w(i) + h;
    const Vec p = limit_map_phi(L, xp, opts);
    xp(i) = w(i) - h;
    const Vec m = limit_map_phi(L, xp, opts);
    xp(i) = w(i);
    acc += p + m - 2.0 * c;
  }
  return acc / (h * h);
}

Mat phi_jacobian_fd(const SmoothLoss& L, const Vec& w, double h, const PhiOptions& opts) {
  Mat J(w.size(), w.size());
  Vec xp = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    xp(j) = w(j) + h;
    const Vec p = limit_map_phi(L, xp, opts);
    xp(j) = w(j) - h;
    const Vec m = limit_map_phi(L, xp, opts);
    xp(j) = w(j);
    J.col(j) = (p - m) / (2.0 * h);
  }
  return J;
}

double distance_to_gamma_estimate(const SmoothLoss& L, const Vec& w, double delta) {
  const SpectralSplit s = spectral_split(L.hessian(w), delta);
  if (s.rank == 0) return 0.0;
  return L.gradient(w).norm() / s.eigenvalues(s.rank - 1);
}

}  // namespace nglab
