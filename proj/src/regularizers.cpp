#include "nglab/regularizers.hpp"

#include "nglab/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nglab {

std::string to_string(RegProvenance p) {
  switch (p) {
    case RegProvenance::analytic_closed_form: return "analytic-closed-form";
    case RegProvenance::numeric_eta_laplacian: return "numeric-eta-laplacian";
    case RegProvenance::correlated: return "correlated";
  }
  return "?";
}

std::string to_string(Timescale t) {
  switch (t) {
    case Timescale::nondegenerate: return "nondegenerate";
    case Timescale::degenerate: return "degenerate";
    case Timescale::trivial: return "trivial-on-both";
    case Timescale::inconclusive: return "inconclusive";
  }
  return "?";
}

double default_eta_step(const Vec& w) { return 1e-3 * std::max(1.0, w.norm()); }

namespace {

RegFunctional with_fd_gradient(std::function<double(const Vec&)> value, std::string id,
                               RegProvenance prov = RegProvenance::analytic_closed_form) {
  RegFunctional r;
  r.value = value;
  r.gradient = [value](const Vec& w) { return fd::gradient(value, w); };
  r.provenance = prov;
  r.id = std::move(id);
  return r;
}

}  // namespace

double numeric_reg_value(const NoisyLoss& Lhat, const Vec& w, double h) {
  if (h <= 0.0) h = default_eta_step(w);
  const int d = Lhat.noise_dim;
  Vec eta = Vec::Zero(d);
  const double f0 = Lhat.value(w, eta);
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    eta(i) = h;
    const double fp = Lhat.value(w, eta);
    eta(i) = -h;
    const double fm = Lhat.value(w, eta);
    eta(i) = 0.0;
    acc += fp + fm - 2.0 * f0;
  }
  return 0.5 * acc / (h * h);
}

RegFunctional numeric_reg(const NoisyLoss& Lhat, double h) {
  RegFunctional r;
  r.provenance = RegProvenance::numeric_eta_laplacian;
  r.id = "numeric:" + Lhat.id;
  r.value = [Lhat, h](const Vec& w) { return numeric_reg_value(Lhat, w, h); };
  r.gradient = [Lhat, h](const Vec& w) {
    const double hh = h > 0.0 ? h : default_eta_step(w);
    const int d = Lhat.noise_dim;
    Vec eta = Vec::Zero(d);
    const Vec g0 = Lhat.grad_w(w, eta);
    Vec acc = Vec::Zero(w.size());
    for (int i = 0; i < d; ++i) {
      eta(i) = hh;
      acc += Lhat.grad_w(w, eta);
      eta(i) = -hh;
      acc += Lhat.grad_w(w, eta);
      eta(i) = 0.0;
      acc -= 2.0 * g0;
    }
    return Vec(0.5 * acc / (hh * hh));
  };
  return r;
}

Mat eta_hessian(const NoisyLoss& Lhat, const Vec& w, double h) {
  if (h <= 0.0) h = default_eta_step(w);
  return fd::hessian([&](const Vec& eta) { return Lhat.value(w, eta); }, Vec::Zero(Lhat.noise_dim),
                     h);
}

RegFunctional reg_gaussian_dropconnect(const SmoothLoss& L) {
  return with_fd_gradient(
      [L](const Vec& w) {
        const Mat H = L.hessian(w);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < w.size(); ++j) acc += w(j) * w(j) * H(j, j);
        return 0.5 * acc;
      },
      "gaussian-dropconnect");
}

RegFunctional reg_bernoulli_dropconnect(const SmoothLoss& L) {
  return with_fd_gradient(
      [L](const Vec& w) {
        const double l0 = L.value(w);
        double acc = L.gradient(w).dot(w);
        Vec v = w;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
          v(j) = 0.0;
          acc += L.value(v) - l0;
          v(j) = w(j);
        }
        return acc;
      },
      "bernoulli-dropconnect");
}

RegFunctional reg_anti_pgd(const SmoothLoss& L) {
  return with_fd_gradient([L](const Vec& w) { return 0.5 * L.hessian(w).trace(); }, "anti-pgd");
}

RegFunctional reg_label_noise(const SmoothLoss& L, int n_data) {
  if (n_data < 1) throw ConfigError("reg_label_noise: N must be >= 1");
  const double N = n_data;
  return with_fd_gradient([L, N](const Vec& w) { return 0.5 / N * L.hessian(w).trace(); },
                          "label-noise");
}

RegFunctional reg_olm(const Dataset& data) {
  data.validate();
  const Vec col_sq = data.inputs.array().square().colwise().sum().transpose();
  const int d = data.dim_in();
  const double N = data.size();
  RegFunctional r;
  r.id = "dropout-olm";
  r.value = [col_sq, d, N](const Vec& w) {
    if (w.size() != 2 * d) throw ConfigError("reg_olm: parameter dimension mismatch");
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = w(j) * w(j) - w(d + j) * w(d + j);
      acc += c * c * col_sq(j);
    }
    return acc / N;
  };
  r.gradient = [col_sq, d, N](const Vec& w) {
    Vec g(2 * d);
    for (int j = 0; j < d; ++j) {
      const double c = w(j) * w(j) - w(d + j) * w(d + j);
      g(j) = 4.0 * c * w(j) * col_sq(j) / N;
      g(d + j) = -4.0 * c * w(d + j) * col_sq(j) / N;
    }
    return g;
  };
  return r;
}

RegFunctional reg_shallow(int n_hidden, const Dataset& data) {
  data.validate();
  const int n = n_hidden;
  const int d = data.dim_in();
  RegFunctional r;
  r.id = "dropout-shallow";
  r.value = [data, n, d](const Vec& w) {
    if (w.size() != n * (d + 1)) throw ConfigError("reg_shallow: parameter dimension mismatch");
    double acc = 0.0;
    for (int i = 0; i < data.size(); ++i) {
      const Vec x = data.input(i);
      for (int j = 0; j < n; ++j) {
        const double s = smooth_relu(w.segment(n + j * d, d).dot(x));
        acc += w(j) * w(j) * s * s;
      }
    }
    return acc / data.size();
  };
  r.gradient = [data, n, d](const Vec& w) {
    Vec g = Vec::Zero(n * (d + 1));
    for (int i = 0; i < data.size(); ++i) {
      const Vec x = data.input(i);
      for (int j = 0; j < n; ++j) {
        const double z = w.segment(n + j * d, d).dot(x);
        const double s = smooth_relu(z);
        g(j) += 2.0 * w(j) * s * s;
        g.segment(n + j * d, d) += 2.0 * w(j) * w(j) * s * smooth_relu_d1(z) * x;
      }
    }
    return Vec(g / data.size());
  };
  return r;
}

RegFunctional reg_correlated(const SmoothLoss& L, const Mat& C) {
  if (C.rows() != L.dim || C.cols() != L.dim)
    throw ConfigError("reg_correlated: covariance dimension mismatch");
  return with_fd_gradient(
      [L, C](const Vec& w) { return 0.5 * (L.hessian(w).cwiseProduct(C)).sum(); }, "correlated",
      RegProvenance::correlated);
}

RegFunctional reg_correlated(const NoisyLoss& Lhat, const Mat& C, double h) {
  if (C.rows() != Lhat.noise_dim || C.cols() != Lhat.noise_dim)
    throw ConfigError("reg_correlated: covariance dimension mismatch");
  return with_fd_gradient(
      [Lhat, C, h](const Vec& w) { return 0.5 * (eta_hessian(Lhat, w, h).cwiseProduct(C)).sum(); },
      "correlated:" + Lhat.id, RegProvenance::correlated);
}

RegFunctional reg_label_plus_minibatch(const SmoothLoss& L, int n_data, double sigma0,
                                       CombinedConstant which) {
  if (n_data < 1) throw ConfigError("reg_label_plus_minibatch: N must be >= 1");
  const double s2 = 1.0 + sigma0 * sigma0;
  const double c = (which == CombinedConstant::sqrt_form ? std::sqrt(s2) : s2) / (2.0 * n_data);
  return with_fd_gradient([L, c](const Vec& w) { return c * L.hessian(w).trace(); },
                          which == CombinedConstant::sqrt_form ? "label+minibatch:sqrt"
                                                               : "label+minibatch:linear");
}

RegFunctional analytic_reg(const NoisyLoss& Lhat) {
  if (!Lhat.analytic_reg) throw ConfigError("scheme " + Lhat.id + " has no closed-form regularizer");
  return with_fd_gradient(Lhat.analytic_reg, "analytic:" + Lhat.id);
}

// ---------------------------------------------------------------------------
// Drift probe

namespace {

struct Moments {
  Vec sum;
  Vec sum_sq;
  long count = 0;

  explicit Moments(Eigen::Index m) : sum(Vec::Zero(m)), sum_sq(Vec::Zero(m)) {}
  void add(const Vec& v) {
    sum += v;
    sum_sq += v.cwiseProduct(v);
    ++count;
  }
  void merge(const Moments& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
  }
  [[nodiscard]] Vec mean() const { return sum / static_cast<double>(count); }
  // variance of the mean
  [[nodiscard]] Vec mean_var() const {
    if (count < 2) return Vec::Zero(sum.size());
    const Vec mu = mean();
    const double n = static_cast<double>(count);
    Vec v = (sum_sq / n - mu.cwiseProduct(mu)).cwiseMax(0.0) * (n / (n - 1.0));
    return v / n;
  }
};

// Runs `draw` n times split over a fixed number of chunks; chunk c owns the
// substream (seed, c). Chunk results merge in index order.
template <class Draw>
Moments chunked(long n, int chunks, std::uint64_t seed, Eigen::Index m, bool parallel,
                const Draw& draw) {
  std::vector<Moments> parts(chunks, Moments(m));
#pragma omp parallel for schedule(static) if (parallel)
  for (int c = 0; c < chunks; ++c) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(c));
    const long lo = n * c / chunks;
    const long hi = n * (c + 1) / chunks;
    for (long k = lo; k < hi; ++k) parts[c].add(draw(rng));
  }
  Moments total(m);
  for (const auto& p : parts) total.merge(p);
  return total;
}

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Calls fn(mask) for every k-subset of {0..d-1}.
template <class Fn>
void for_each_subset(int d, int k, const Fn& fn) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<char> mask(d);
  while (true) {
    std::fill(mask.begin(), mask.end(), 0);
    for (int i : idx) mask[i] = 1;
    fn(mask);
    int i = k - 1;
    while (i >= 0 && idx[i] == d - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

DriftEstimate drift_impl(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w,
                         double alpha, long n_samples, std::uint64_t seed,
                         const DriftOptions& opts, bool parallel) {
  if (family.dim != Lhat.noise_dim) throw ConfigError("drift: noise dim mismatch");
  if (n_samples < 2) throw ConfigError("drift: need at least 2 samples");
  const Eigen::Index m = w.size();
  const int d = family.dim;
  const Vec g0 = Lhat.grad_w(w, Vec::Zero(d));
  DriftEstimate est;

  if (family.sigma == 0.0 && family.kind != NoiseKind::bernoulli_dropout) {
    est.mean = Vec::Zero(m);
    est.std_error = Vec::Zero(m);
    est.method = "degenerate";
    return est;
  }

  if (family.kind == NoiseKind::bernoulli_dropout && opts.allow_stratified) {
    // Stratify on the number K of dropped (-1) coordinates, K ~ Bin(d, p).
    const double p = family.p;
    const double hi = p / (1.0 - p);
    const long per = std::max<long>(1, n_samples / (d + 1));
    Vec mean = Vec::Zero(m);
    Vec var = Vec::Zero(m);
    long evals = 0;
    for (int k = 0; k <= d; ++k) {
      if ((k > 0 && p == 0.0)) break;
      const double lw = log_binom(d, k) + (k > 0 ? k * std::log(p) : 0.0) +
                        (d - k > 0 ? (d - k) * std::log1p(-p) : 0.0);
      const double pi_k = std::exp(lw);
      if (pi_k < 1e-300) continue;
      const double n_patterns = std::exp(log_binom(d, k));
      auto delta_for = [&](const std::vector<char>& mask) {
        Vec eta(d);
        for (int i = 0; i < d; ++i) eta(i) = mask[i] ? -1.0 : hi;
        return Vec(alpha * (g0 - Lhat.grad_w(w, eta)));
      };
      if (n_patterns <= static_cast<double>(per)) {
        Moments mk(m);
        for_each_subset(d, k, [&](const std::vector<char>& mask) { mk.add(delta_for(mask)); });
        mean += pi_k * mk.mean();
        evals += mk.count;
      } else {
        const Moments mk = chunked(per, opts.chunks, seed ^ (0x9E37ULL * (k + 1)), m, parallel,
                                   [&](Rng& rng) {
                                     std::vector<int> perm(d);
                                     std::iota(perm.begin(), perm.end(), 0);
                                     std::vector<char> mask(d, 0);
                                     for (int i = 0; i < k; ++i) {
                                       const int j = i + static_cast<int>(rng.uniform() * (d - i));
                                       std::swap(perm[i], perm[std::min(j, d - 1)]);
                                       mask[perm[i]] = 1;
                                     }
                                     return delta_for(mask);
                                   });
        mean += pi_k * mk.mean();
        var += pi_k * pi_k * mk.mean_var();
        evals += mk.count;
      }
    }
    est.mean = mean;
    est.std_error = var.cwiseSqrt();
    est.evaluations = evals;
    est.method = "stratified";
    return est;
  }

  if (family.symmetric() && opts.allow_antithetic) {
    const long pairs = std::max<long>(1, n_samples / 2);
    const Moments mo = chunked(pairs, opts.chunks, seed, m, parallel, [&](Rng& rng) {
      const Vec eta = sample(family, rng);
      return Vec(alpha * (g0 - 0.5 * (Lhat.grad_w(w, eta) + Lhat.grad_w(w, -eta))));
    });
    est.mean = mo.mean();
    est.std_error = mo.mean_var().cwiseSqrt();
    est.evaluations = 2 * mo.count;
    est.method = "antithetic";
    return est;
  }

  const Moments mo = chunked(n_samples, opts.chunks, seed, m, parallel, [&](Rng& rng) {
    const Vec eta = sample(family, rng);
    return Vec(alpha * (g0 - Lhat.grad_w(w, eta)));
  });
  est.mean = mo.mean();
  est.std_error = mo.mean_var().cwiseSqrt();
  est.evaluations = mo.count;
  est.method = "plain";
  return est;
}

}  // namespace

DriftEstimate drift_expectation(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w,
                                double alpha, long n_samples, std::uint64_t seed,
                                const DriftOptions& opts) {
  return drift_impl(Lhat, family, w, alpha, n_samples, seed, opts, true);
}

DriftEstimate drift_expectation_serial(const NoisyLoss& Lhat, const NoiseFamily& family,
                                       const Vec& w, double alpha, long n_samples,
                                       std::uint64_t seed, const DriftOptions& opts) {
  return drift_impl(Lhat, family, w, alpha, n_samples, seed, opts, false);
}

// ---------------------------------------------------------------------------

Mat degenerate_sigma(const DegenerateParts& parts, const Vec& w, double sigma0) {
  const Mat J = parts.f_jac(w).transpose();  // m x d
  Mat S = J * J.transpose();
  if (parts.H_grads) {
    for (const auto& e : parts.H_grads(w)) S += sigma0 * sigma0 * e.grad * e.grad.transpose();
  }
  return S;
}

TimescaleReport timescale_classify(const NoisyLoss& Lhat, const std::vector<Vec>& probes,
                                   double tol, double sigma0) {
  if (probes.empty()) throw ConfigError("timescale_classify: no probe points");
  TimescaleReport rep;
  const RegFunctional reg = numeric_reg(Lhat);
  for (const Vec& w : probes) {
    const SpectralSplit split = spectral_split(Lhat.base.hessian(w));
    const ProjectorPair pp = projectors(split);
    rep.reg_grad_sup = std::max(rep.reg_grad_sup, (pp.P * reg.gradient(w)).norm());
    if (Lhat.parts) {
      const Mat J = Lhat.parts->f_jac(w).transpose();
      double tn = (pp.P * J).norm();
      if (Lhat.parts->H_grads)
        for (const auto& e : Lhat.parts->H_grads(w)) tn = std::max(tn, sigma0 * (pp.P * e.grad).norm());
      rep.tangent_noise_sup = std::max(rep.tangent_noise_sup, tn);
      const Mat S = degenerate_sigma(*Lhat.parts, w, sigma0);
      const Vec drift =
          0.5 * phi_second_derivative(split, third_derivative(Lhat.base, w), S);
      rep.sigma_drift_sup = std::max(rep.sigma_drift_sup, drift.norm());
    }
  }
  auto band = [tol](double v) { return v > 0.1 * tol && v < 10.0 * tol; };
  if (band(rep.reg_grad_sup)) {
    rep.verdict = Timescale::inconclusive;
    rep.notes = "regularizer gradient near tolerance";
  } else if (rep.reg_grad_sup >= 10.0 * tol) {
    rep.verdict = Timescale::nondegenerate;
  } else if (!Lhat.parts) {
    rep.verdict = Timescale::trivial;
    rep.notes = "no degenerate parts";
  } else {
    const double deg = std::max(rep.tangent_noise_sup, rep.sigma_drift_sup);
    if (band(deg)) {
      rep.verdict = Timescale::inconclusive;
      rep.notes = "degenerate drift/noise near tolerance";
    } else {
      rep.verdict = deg >= 10.0 * tol ? Timescale::degenerate : Timescale::trivial;
    }
  }
  return rep;
}

}  // namespace nglab
