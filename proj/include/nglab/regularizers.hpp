#pragma once

#include "nglab/manifold.hpp"
#include "nglab/noise.hpp"
#include "nglab/schemes.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nglab {

enum class RegProvenance { analytic_closed_form, numeric_eta_laplacian, correlated };
std::string to_string(RegProvenance p);

struct RegFunctional {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  RegProvenance provenance = RegProvenance::analytic_closed_form;
  std::string id;
};

/// Default eta step for second differences: 1e-3 * max(1, |w|).
double default_eta_step(const Vec& w);

/// 1/2 sum_i d^2 L^/d eta_i^2 at eta = 0 by second differences (h <= 0 picks
/// the default). The gradient differences grad_w L^ the same way.
RegFunctional numeric_reg(const NoisyLoss& Lhat, double h = 0.0);
double numeric_reg_value(const NoisyLoss& Lhat, const Vec& w, double h = 0.0);

/// Hessian of eta -> L^(w, eta) at eta = 0.
Mat eta_hessian(const NoisyLoss& Lhat, const Vec& w, double h = 0.0);

/// 1/2 sum_j w_j^2 d^2 L / dw_j^2.
RegFunctional reg_gaussian_dropconnect(const SmoothLoss& L);
/// grad L(w).w + sum_j (L(w * (1 - e_j)) - L(w)).
RegFunctional reg_bernoulli_dropconnect(const SmoothLoss& L);
/// 1/2 Laplacian L.
RegFunctional reg_anti_pgd(const SmoothLoss& L);
/// (1/2N) Laplacian L.
RegFunctional reg_label_noise(const SmoothLoss& L, int n_data);
/// (1/N) sum_j (u_j^2 - v_j^2)^2 sum_i x_ij^2.
RegFunctional reg_olm(const Dataset& data);
/// (1/N) sum_j sum_i a_j^2 s(b_j^T x_i)^2.
RegFunctional reg_shallow(int n_hidden, const Dataset& data);
/// 1/2 hess L : C (for L^ = L(w + eta) with covariance C).
RegFunctional reg_correlated(const SmoothLoss& L, const Mat& C);
/// 1/2 hess_eta L^(w, 0) : C.
RegFunctional reg_correlated(const NoisyLoss& Lhat, const Mat& C, double h = 0.0);
/// For the combined label + minibatch scheme two constants are in play:
/// sqrt(1 + s0^2)/(2N) and (1 + s0^2)/(2N) times the Laplacian.
enum class CombinedConstant { sqrt_form, linear_form };
RegFunctional reg_label_plus_minibatch(const SmoothLoss& L, int n_data, double sigma0,
                                       CombinedConstant which);
/// The attached analytic_reg of a scheme with FD gradient; throws ConfigError
/// if the scheme has none.
RegFunctional analytic_reg(const NoisyLoss& Lhat);

struct DriftEstimate {
  Vec mean;    // estimate of E[alpha (grad L^(w,0) - grad L^(w,eta))]
  Vec std_error;  // per-component standard error
  long evaluations = 0;
  std::string method;  // "antithetic", "stratified" or "plain"
};

struct DriftOptions {
  int chunks = 64;  // fixed partition; results do not depend on thread count
  bool allow_antithetic = true;
  bool allow_stratified = true;
};

/// OpenMP-parallel Monte-Carlo probe.
DriftEstimate drift_expectation(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w,
                                double alpha, long n_samples, std::uint64_t seed,
                                const DriftOptions& opts = {});
/// Same partition and arithmetic, run on one thread.
DriftEstimate drift_expectation_serial(const NoisyLoss& Lhat, const NoiseFamily& family,
                                       const Vec& w, double alpha, long n_samples,
                                       std::uint64_t seed, const DriftOptions& opts = {});

enum class Timescale { nondegenerate, degenerate, trivial, inconclusive };
std::string to_string(Timescale t);

struct TimescaleReport {
  Timescale verdict = Timescale::inconclusive;
  double reg_grad_sup = 0.0;      // sup |P grad Reg|
  double tangent_noise_sup = 0.0;  // sup |P grad f| (degenerate parts)
  double sigma_drift_sup = 0.0;   // sup |1/2 d^2 Phi[Sigma]|
  std::string notes;
};

/// Classifies the clock on which L^ moves along Gamma at the probe points.
/// A quantity within a factor 10 of tol makes the verdict inconclusive.
TimescaleReport timescale_classify(const NoisyLoss& Lhat, const std::vector<Vec>& probes,
                                   double tol = 1e-6, double sigma0 = 1.0);

/// Sigma(w) = J J^T + sigma0^2 sum_{i<j} dH_ij dH_ij^T with J = grad f (m x d).
Mat degenerate_sigma(const DegenerateParts& parts, const Vec& w, double sigma0);

}  // namespace nglab
