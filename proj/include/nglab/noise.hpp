#pragma once

#include "nglab/rng.hpp"
#include "nglab/types.hpp"

#include <string>
#include <vector>

namespace nglab {

enum class NoiseKind {
  gaussian,
  bernoulli_dropout,  // support {-1, p/(1-p)}, P(-1) = p
  uniform,            // on (-sqrt(3) sigma, sqrt(3) sigma)
  gaussian_correlated,
  product,  // independent blocks stacked in order
};

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

/// Centered noise distribution rho(sigma) on R^d.
struct NoiseFamily {
  NoiseKind kind = NoiseKind::gaussian;
  double sigma = 0.0;  // per-coordinate std; derived for bernoulli
  double p = 0.0;      // drop probability (bernoulli only)
  int dim = 1;
  Mat covariance;      // gaussian_correlated only
  Mat factor;          // covariance = factor * factor^T
  std::vector<NoiseFamily> parts;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
  /// Distribution invariant under eta -> -eta.
  [[nodiscard]] bool symmetric() const;
  /// Per-coordinate variances.
  [[nodiscard]] Vec variances() const;
};

NoiseFamily gaussian_noise(double sigma, int dim);
NoiseFamily bernoulli_dropout_noise(double p, int dim);
NoiseFamily uniform_noise(double sigma, int dim);
/// Sampling uses a pivoted LDL^T factor so rank-deficient C is allowed.
NoiseFamily correlated_gaussian_noise(const Mat& C);
/// Minibatch inclusion noise: eta_i in {-1, (N-m)/m}, P(-1) = 1 - m/N.
NoiseFamily minibatch_noise(int n_data, int m_expect);
NoiseFamily product_noise(std::vector<NoiseFamily> parts);

/// One draw of eta; advances rng.
Vec sample(const NoiseFamily& family, Rng& rng);
void sample_into(const NoiseFamily& family, Rng& rng, double* out);

/// M_k = E|eta_i|^k for a single coordinate. Throws NotAvailableError for
/// correlated/product families and k < 1.
double analytic_moment(const NoiseFamily& family, int k);

/// Scaling class of M_k in sigma: "sigma^k" (gaussian, uniform) or
/// "sigma^2" (two-point families).
std::string moment_scaling_class(const NoiseFamily& family);

/// Realized sup_{k <= T/(alpha^2 sigma^2)} alpha |eta_k|^p_exp over one
/// stream. Uses `family` for the draws and `sigma` for the horizon.
/// Throws BudgetError if the horizon exceeds 1e8 draws.
double noise_decay_check(const NoiseFamily& family, double alpha, double sigma, double p_exp,
                         double horizon, Rng& rng);

inline constexpr double kNoiseDecayBudget = 1e8;

}  // namespace nglab
