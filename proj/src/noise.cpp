#include "nglab/noise.hpp"

#include <cmath>
#include <numbers>

namespace nglab {

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::bernoulli_dropout: return "bernoulli-dropout";
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::gaussian_correlated: return "gaussian-correlated";
    case NoiseKind::product: return "product";
  }
  return "?";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "bernoulli-dropout" || s == "bernoulli") return NoiseKind::bernoulli_dropout;
  if (s == "uniform") return NoiseKind::uniform;
  if (s == "gaussian-correlated") return NoiseKind::gaussian_correlated;
  throw ConfigError("unknown noise kind '" + s + "'");
}

void NoiseFamily::validate() const {
  if (dim < 1) throw ConfigError("noise dim must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be >= 0");
  switch (kind) {
    case NoiseKind::bernoulli_dropout:
      if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout p must be in [0, 1)");
      break;
    case NoiseKind::gaussian_correlated:
      if (covariance.rows() != dim || covariance.cols() != dim)
        throw ConfigError("covariance must be dim x dim");
      if ((covariance - covariance.transpose()).norm() > 1e-12 * (1.0 + covariance.norm()))
        throw ConfigError("covariance must be symmetric");
      break;
    case NoiseKind::product: {
      int total = 0;
      for (const auto& q : parts) {
        q.validate();
        total += q.dim;
      }
      if (total != dim) throw ConfigError("product noise: block dims do not sum to dim");
      break;
    }
    default: break;
  }
}

bool NoiseFamily::symmetric() const {
  switch (kind) {
    case NoiseKind::bernoulli_dropout: return p == 0.0 || p == 0.5;
    case NoiseKind::product:
      for (const auto& q : parts)
        if (!q.symmetric()) return false;
      return true;
    default: return true;
  }
}

Vec NoiseFamily::variances() const {
  switch (kind) {
    case NoiseKind::gaussian_correlated: return covariance.diagonal();
    case NoiseKind::product: {
      Vec v(dim);
      int off = 0;
      for (const auto& q : parts) {
        v.segment(off, q.dim) = q.variances();
        off += q.dim;
      }
      return v;
    }
    default: return Vec::Constant(dim, sigma * sigma);
  }
}

NoiseFamily gaussian_noise(double sigma, int dim) {
  NoiseFamily f;
  f.kind = NoiseKind::gaussian;
  f.sigma = sigma;
  f.dim = dim;
  f.validate();
  return f;
}

NoiseFamily bernoulli_dropout_noise(double p, int dim) {
  NoiseFamily f;
  f.kind = NoiseKind::bernoulli_dropout;
  f.p = p;
  f.dim = dim;
  f.validate();
  f.sigma = std::sqrt(p / (1.0 - p));
  return f;
}

NoiseFamily uniform_noise(double sigma, int dim) {
  NoiseFamily f;
  f.kind = NoiseKind::uniform;
  f.sigma = sigma;
  f.dim = dim;
  f.validate();
  return f;
}

NoiseFamily correlated_gaussian_noise(const Mat& C) {
  NoiseFamily f;
  f.kind = NoiseKind::gaussian_correlated;
  f.dim = static_cast<int>(C.rows());
  f.covariance = C;
  f.validate();
  // C = P^T L D L^T P with pivoting; tiny negative pivots from rounding are
  // clamped so semidefinite C works.
  Eigen::LDLT<Mat> ldlt(C);
  if (ldlt.info() != Eigen::Success) throw NumericError("LDLT of covariance failed");
  Vec d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) < -1e-12 * (1.0 + C.norm())) throw ConfigError("covariance is not PSD");
    d(i) = std::sqrt(std::max(0.0, d(i)));
  }
  Mat Lm = ldlt.matrixL();
  Mat B = Lm * d.asDiagonal();
  f.factor = ldlt.transpositionsP().transpose() * B;
  f.sigma = std::sqrt(C.diagonal().maxCoeff());
  return f;
}

NoiseFamily minibatch_noise(int n_data, int m_expect) {
  if (m_expect < 1 || m_expect > n_data)
    throw ConfigError("minibatch: m_expect must be in [1, N]");
  return bernoulli_dropout_noise(1.0 - static_cast<double>(m_expect) / n_data, n_data);
}

NoiseFamily product_noise(std::vector<NoiseFamily> parts) {
  NoiseFamily f;
  f.kind = NoiseKind::product;
  f.dim = 0;
  for (const auto& q : parts) f.dim += q.dim;
  f.parts = std::move(parts);
  f.validate();
  double s = 0.0;
  for (const auto& q : f.parts) s = std::max(s, q.sigma);
  f.sigma = s;
  return f;
}

void sample_into(const NoiseFamily& f, Rng& rng, double* out) {
  switch (f.kind) {
    case NoiseKind::gaussian:
      if (f.sigma == 0.0) {
        for (int i = 0; i < f.dim; ++i) out[i] = 0.0;
        return;
      }
      for (int i = 0; i < f.dim; ++i) out[i] = f.sigma * rng.normal();
      return;
    case NoiseKind::bernoulli_dropout: {
      const double hi = f.p / (1.0 - f.p);
      for (int i = 0; i < f.dim; ++i) out[i] = rng.uniform() < f.p ? -1.0 : hi;
      return;
    }
    case NoiseKind::uniform: {
      const double a = std::sqrt(3.0) * f.sigma;
      for (int i = 0; i < f.dim; ++i) out[i] = a * (2.0 * rng.uniform() - 1.0);
      return;
    }
    case NoiseKind::gaussian_correlated: {
      const Vec z = rng.normal_vec(f.dim);
      Eigen::Map<Vec>(out, f.dim) = f.factor * z;
      return;
    }
    case NoiseKind::product: {
      int off = 0;
      for (const auto& q : f.parts) {
        sample_into(q, rng, out + off);
        off += q.dim;
      }
      return;
    }
  }
}

Vec sample(const NoiseFamily& family, Rng& rng) {
  Vec v(family.dim);
  sample_into(family, rng, v.data());
  return v;
}

double analytic_moment(const NoiseFamily& f, int k) {
  if (k < 1) throw NotAvailableError("moment order must be >= 1");
  switch (f.kind) {
    case NoiseKind::gaussian: {
      // E|Z|^k = 2^{k/2} Gamma((k+1)/2) / sqrt(pi); (k-1)!! for even k.
      if (k % 2 == 0) {
        double dfact = 1.0;
        for (int j = k - 1; j > 1; j -= 2) dfact *= j;
        return std::pow(f.sigma, k) * dfact;
      }
      return std::pow(f.sigma, k) * std::pow(2.0, 0.5 * k) * std::tgamma(0.5 * (k + 1)) /
             std::sqrt(std::numbers::pi);
    }
    case NoiseKind::uniform: return std::pow(std::sqrt(3.0) * f.sigma, k) / (k + 1);
    case NoiseKind::bernoulli_dropout:
      return f.p + (1.0 - f.p) * std::pow(f.p / (1.0 - f.p), k);
    default: throw NotAvailableError("no closed-form moment for " + to_string(f.kind));
  }
}

std::string moment_scaling_class(const NoiseFamily& f) {
  switch (f.kind) {
    case NoiseKind::bernoulli_dropout: return "sigma^2";
    case NoiseKind::product:
      for (const auto& q : f.parts)
        if (moment_scaling_class(q) == "sigma^2") return "sigma^2";
      return "sigma^k";
    default: return "sigma^k";
  }
}

double noise_decay_check(const NoiseFamily& family, double alpha, double sigma, double p_exp,
                         double horizon, Rng& rng) {
  if (!(alpha > 0.0) || !(horizon > 0.0) || sigma < 0.0)
    throw ConfigError("noise_decay_check: alpha, T must be > 0 and sigma >= 0");
  if (sigma == 0.0 || family.sigma == 0.0) return 0.0;
  const double n = std::floor(horizon / (alpha * alpha * sigma * sigma));
  if (n > kNoiseDecayBudget) throw BudgetError("noise_decay_check: horizon needs more than 1e8 draws");
  const auto steps = static_cast<long long>(n);
  Vec eta(family.dim);
  double best = 0.0;
  for (long long k = 0; k <= steps; ++k) {
    sample_into(family, rng, eta.data());
    best = std::max(best, alpha * std::pow(eta.norm(), p_exp));
  }
  return best;
}

}  // namespace nglab
