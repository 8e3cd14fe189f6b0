#pragma once

#include "nglab/losses.hpp"
#include "nglab/ode.hpp"

#include <vector>

namespace nglab {

struct SpectralSplit {
  Vec eigenvalues;  // descending
  Mat eigenvectors;  // columns match eigenvalues
  int rank = 0;      // #{lambda > delta}
  double delta = 0.0;
  bool ambiguous_gap = false;  // some eigenvalue in [delta/2, 2 delta]
};

/// delta <= 0 selects the default 1e-3 * max(lambda_max, 0), floored at 1e-12.
SpectralSplit spectral_split(const Mat& H, double delta = 0.0);

struct ProjectorPair {
  Mat P;  // tangent: span of eigenvectors with lambda <= delta
  Mat Q;  // I - P
};

ProjectorPair projectors(const SpectralSplit& split);

inline constexpr double kOnManifoldGradTol = 1e-5;

/// Throws OffManifoldError when |grad L(w)| >= tol_grad.
ProjectorPair tangent_projector(const SmoothLoss& L, const Vec& w, double delta = 0.0,
                                double tol_grad = kOnManifoldGradTol);

Mat pseudo_inverse(const SpectralSplit& split);

/// X with H X + X H = S on the positive eigenspace: X~_ij = S~_ij/(l_i+l_j)
/// when l_i + l_j > delta, else 0.
Mat lyapunov_pseudo_solve(const SpectralSplit& split, const Mat& S);

/// log of the product of eigenvalues above delta.
double log_pseudo_determinant(const Mat& H, double delta);

/// P grad log|hess L|_+ by central differences with step h; the rank is
/// pinned by delta at w and must not change along the stencil.
Vec pseudo_determinant_log_grad(const SmoothLoss& L, const Vec& w, double delta = 0.0,
                                double h = 1e-4);

/// T_a = d/dw_a hess L(w), by central differences of the Hessian.
struct ThirdDerivative {
  std::vector<Mat> slices;
  /// d^2(grad L)[M] = sum_ab d_a d_b grad L * M_ab.
  [[nodiscard]] Vec contract(const Mat& M) const;
  /// grad of the Laplacian: (tr T_a)_a.
  [[nodiscard]] Vec laplacian_gradient() const;
};
ThirdDerivative third_derivative(const SmoothLoss& L, const Vec& w, double h = 1e-4);

struct PhiOptions {
  double tol_grad = 1e-9;
  OdeOptions ode{};
  double t_max = 1e5;
  double delta = 0.0;  // for the final normal correction
};

struct PhiResult {
  Vec point;
  double flow_time = 0.0;
  double final_grad_norm = 0.0;
};

/// Gradient-flow limit Phi(x0), followed by one normal Newton correction.
/// Throws NotAttractedError when the loss stops decreasing or t_max is hit.
PhiResult limit_map_phi_ex(const SmoothLoss& L, const Vec& x0, const PhiOptions& opts = {});
Vec limit_map_phi(const SmoothLoss& L, const Vec& x0, const PhiOptions& opts = {});

/// Second derivative of Phi at w on Gamma applied to symmetric Sigma:
///   -H^+ T[P S P] - P T[L^+(Q S Q)] - 2 P T[H^+ Q S P].
Vec phi_second_derivative(const SmoothLoss& L, const Vec& w, const Mat& Sigma,
                          double delta = 0.0);
Vec phi_second_derivative(const SpectralSplit& split, const ThirdDerivative& T,
                          const Mat& Sigma);

/// Sigma = I pieces: the normal term H^+ T[P] and the tangential P grad log|H|_+.
struct IdentityTerms {
  Vec normal_term;
  Vec log_det_grad;
  /// -normal_term - 1/2 log_det_grad
  [[nodiscard]] Vec combined() const { return -normal_term - 0.5 * log_det_grad; }
};
IdentityTerms phi_second_derivative_identity(const SmoothLoss& L, const Vec& w,
                                             double delta = 0.0);

/// Sigma = hess L: -1/2 P grad(Laplacian L).
Vec phi_second_derivative_hessian(const SmoothLoss& L, const Vec& w, double delta = 0.0);

/// sum_i (Phi(w + h e_i) + Phi(w - h e_i) - 2 Phi(w)) / h^2.
Vec phi_laplacian_fd(const SmoothLoss& L, const Vec& w, double h, const PhiOptions& opts);

/// Finite-difference Jacobian of Phi.
Mat phi_jacobian_fd(const SmoothLoss& L, const Vec& w, double h, const PhiOptions& opts);

/// |grad L| / (smallest eigenvalue above delta); 0 when rank is 0.
double distance_to_gamma_estimate(const SmoothLoss& L, const Vec& w, double delta = 0.0);

}  // namespace nglab
