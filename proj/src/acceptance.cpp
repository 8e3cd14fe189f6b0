#include "nglab/acceptance.hpp"

#include "nglab/experiments.hpp"
#include "nglab/finite_diff.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace nglab {

namespace {

// Tolerances, one block per criterion.
constexpr double kC1DistTol = 0.02;
constexpr double kC1AngleTol = 0.05;
constexpr double kC1Fraction = 0.9;
constexpr double kC2FinalTol = 0.05;
constexpr double kC3RelTol = 0.05;
constexpr double kC4JacTol = 1e-4;
constexpr double kC4IdentityTol = 1e-3;
constexpr double kC4HessTol = 1e-6;
constexpr double kC5MinRatio = 5.0;
constexpr double kC5Arclength = 0.3;
constexpr double kC6MaxRatio = 0.1;
constexpr double kC7DistTol = 0.05;
constexpr double kC8Z = 1.96;  // two-sided 95% interval
constexpr double kC9SlopeTol = 0.2;
constexpr double kC11RegRelTol = 1e-5;
constexpr double kC11LaplacianTol = 1e-6;

using Clock = std::chrono::steady_clock;

CriterionResult named(int id, std::string name) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

// Interpolating OLM used by criteria 6-8.
constexpr int kOlmN = 8;
constexpr int kOlmD = 6;
constexpr std::uint64_t kOlmSeed = 7;

// ---- 1 -------------------------------------------------------------------

CriterionResult c1(const AcceptOptions& o) {
  CriterionResult r = named(1, "ring anti-PGD terminal state");
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss Lh = anti_pgd(L);
  const NoiseFamily fam = gaussian_noise(0.03, 2);
  const Vec w0{{0.3, 1.6}};
  const double alpha = 0.3;
  const long steps = 200000;
  // Cheap enough that smoke runs keep every seed; the 90% rule needs them.
  const int n_seeds = 20;
  const double theta_start = ring::angle(limit_map_phi(L, w0));
  const double theta_star = ring::descend_minimizer(ring::anti_pgd_reg, theta_start);
  std::vector<double> dist(n_seeds), ang(n_seeds);
  parallel_for(n_seeds, [&](int i) {
    Rng rng = Rng::substream(o.seed, 100 + i);
    const Vec w = noisy_gd_final(Lh, fam, w0, alpha, steps, rng);
    dist[i] = std::abs(w.norm() - 1.0);
    ang[i] = ring::angular_distance(ring::angle(w), theta_star);
  }, o.parallel);
  int good = 0;
  for (int i = 0; i < n_seeds; ++i) good += (dist[i] < kC1DistTol && ang[i] < kC1AngleTol);
  const double frac = static_cast<double>(good) / n_seeds;
  r.pass = frac >= kC1Fraction;
  r.measured = {{"theta_star", theta_star}, {"cos_theta_star", std::cos(theta_star)},
                {"reg_at_theta_star", ring::anti_pgd_reg(theta_star)},
                {"fraction_within_tolerance", frac}, {"dist_gamma", dist}, {"angular_error", ang}};
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d/%d seeds with dist<%.2g and angle<%.2g rad (theta*=%.4f, need %.0f%%)",
                good, n_seeds, kC1DistTol, kC1AngleTol, theta_star, 100 * kC1Fraction);
  r.summary = buf;
  return r;
}

// ---- 2 -------------------------------------------------------------------

CriterionResult c2(const AcceptOptions& o) {
  CriterionResult r = named(2, "shifted process converges to constrained flow");
  Json cfg = {{"loss", "ring-sine"},
              {"scheme", "anti-pgd"},
              {"plan", {{"alpha", 0.3}, {"sigma", 0.03}, {"T", 2.0}}},
              {"n_seeds", o.quick ? 5 : 20},
              {"seed", o.seed * 1000 + 200},
              {"grid", 200}};
  const Scenario sc = build_scenario(cfg);
  std::vector<std::pair<double, double>> levels = {{0.3, 0.03}, {0.15, 0.015}, {0.075, 0.0075}};
  const ComparisonReport rep = cmd_compare(sc, levels, o.parallel);
  const double final_med = rep.levels.back().median_sup;
  r.pass = rep.decreasing && final_med < kC2FinalTol;
  r.measured = rep.to_json();
  std::string meds;
  for (const auto& l : rep.levels) {
    char b[32];
    std::snprintf(b, sizeof b, "%s%.4g", meds.empty() ? "" : " > ", l.median_sup);
    meds += b;
  }
  r.summary = "median sup angular distance " + meds + (rep.decreasing ? "" : " (not decreasing)") +
              "; final < " + std::to_string(kC2FinalTol).substr(0, 4);
  return r;
}

// ---- 3 -------------------------------------------------------------------

struct ProbeCase {
  std::string name;
  NoisyLoss scheme;
  RegFunctional reg;
  Vec w;
  bool bernoulli = false;
};

CriterionResult c3(const AcceptOptions& o) {
  CriterionResult r = named(3, "drift probe matches P grad Reg");
  const SmoothLoss ring = ring_sine_loss();
  std::vector<ProbeCase> cases;
  const Vec top{{0.0, 1.0}};
  cases.push_back({"anti-pgd", anti_pgd(ring), reg_anti_pgd(ring), top});
  cases.push_back({"gaussian-dropconnect", drop_connect(ring, NoiseKind::gaussian),
                   reg_gaussian_dropconnect(ring), top});
  cases.push_back({"bernoulli-dropconnect", drop_connect(ring, NoiseKind::bernoulli_dropout),
                   reg_bernoulli_dropconnect(ring), top, true});
  {
    const Scenario sc = build_scenario(
        {{"loss", {{"id", "mse-olm"}, {"data", {{"synthetic", "olm"}, {"n", 3}, {"d_in", 6}, {"seed", 3}}}}},
         {"scheme", "dropout-olm"}});
    cases.push_back({"dropout-olm", sc.scheme, reg_olm(*sc.data), sc.w0});
  }
  {
    const Scenario sc = build_scenario(
        {{"loss", {{"id", "mse-shallow"}, {"n_hidden", 3},
                   {"data", {{"synthetic", "shallow"}, {"n", 4}, {"d_in", 3}, {"seed", 24}}}}},
         {"scheme", "dropout-shallow"}});
    cases.push_back({"dropout-shallow", sc.scheme, reg_shallow(3, *sc.data), sc.w0});
  }
  const long n = o.quick ? 100000 : 1000000;
  const double alpha = 0.1;
  Json rows = Json::array();
  bool all = true;
  double worst = 0.0;
  std::uint64_t salt = 0;
  for (const auto& c : cases) {
    const ProjectorPair pp = tangent_projector(c.scheme.base, c.w);
    const Vec target = pp.P * c.reg.gradient(c.w);
    Json row = {{"scheme", c.name}, {"w", to_std(c.w)}, {"P_grad_reg", to_std(target)}};
    for (double sigma : {0.01, 0.005}) {
      const NoiseFamily fam = c.bernoulli
                                  ? bernoulli_dropout_noise(sigma * sigma / (1.0 + sigma * sigma), c.scheme.noise_dim)
                                  : gaussian_noise(sigma, c.scheme.noise_dim);
      const double s2 = fam.sigma * fam.sigma;
      const DriftEstimate est =
          drift_expectation(c.scheme, fam, c.w, alpha, n, o.seed * 7919 + (++salt), {});
      const Vec got = -(pp.P * est.mean) / (alpha * s2);
      const double rel = (got - target).norm() / target.norm();
      const double se = (pp.P * est.std_error.asDiagonal()).norm() / (alpha * s2) / target.norm();
      all = all && rel < kC3RelTol;
      worst = std::max(worst, rel);
      row[sigma == 0.01 ? "sigma_0.01" : "sigma_0.005"] = {
          {"estimate", to_std(got)}, {"rel_err", rel}, {"rel_std_error", se}, {"method", est.method}};
    }
    rows.push_back(row);
  }
  r.pass = all;
  r.measured = {{"cases", rows}, {"samples", n}, {"worst_rel_err", worst}};
  char buf[160];
  std::snprintf(buf, sizeof buf, "worst relative error %.3g over %zu schemes x 2 sigmas (tol %.2g)",
                worst, cases.size(), kC3RelTol);
  r.summary = buf;
  return r;
}

// ---- 4 -------------------------------------------------------------------

CriterionResult c4(const AcceptOptions&) {
  CriterionResult r = named(4, "limit map derivative oracles");
  const SmoothLoss L = ring_sine_loss();
  std::vector<Vec> pts;
  for (int k = 0; k < 8; ++k) pts.push_back(ring::point(0.1 + 2.0 * std::numbers::pi * k / 8.0));
  const Json v = cmd_verify_phi(L, pts);
  const double j = v["jacobian_err_max"], id = v["identity_err_max"], h = v["hessian_direction_err_max"];
  r.pass = j < kC4JacTol && id < kC4IdentityTol && h < kC4HessTol;
  r.measured = v;
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "(a) jacobian %.2g<%.0e (b) identity %.2g<%.0e (c) hessian direction %.2g<%.0e; "
                "printed identity coefficients miss by %.3g",
                j, kC4JacTol, id, kC4IdentityTol, h, kC4HessTol,
                v["identity_printed_coefficients_err_max"].get<double>());
  r.summary = buf;
  return r;
}

// ---- 5 -------------------------------------------------------------------

long iterations_to_travel(const NoisyLoss& Lh, const NoiseFamily& fam, double theta0, double alpha,
                          double arc, long cap, Rng& rng) {
  Vec w = ring::point(theta0);
  Vec eta(fam.dim);
  double prev = theta0, unwrapped = theta0;
  for (long k = 1; k <= cap; ++k) {
    sample_into(fam, rng, eta.data());
    w -= alpha * Lh.grad_w(w, eta);
    double a = ring::angle(w);
    while (a - prev > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a - prev < -std::numbers::pi) a += 2.0 * std::numbers::pi;
    unwrapped += a - prev;
    prev = a;
    if (std::abs(unwrapped - theta0) >= arc) return k;
  }
  return cap;
}

CriterionResult c5(const AcceptOptions& o) {
  CriterionResult r = named(5, "time-scale separation");
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss nondeg = cosine_modulated_quadratic(L);
  const NoisyLoss deg = norm_linear(L);
  const NoiseFamily fam = gaussian_noise(0.1, 1);
  const double alpha = 0.1, theta0 = 1.0;
  const long cap = 2000000;
  const int n_seeds = o.quick ? 5 : 20;
  std::vector<double> it_nd(n_seeds), it_d(n_seeds);
  parallel_for(n_seeds, [&](int i) {
    Rng a = Rng::substream(o.seed, 500 + i);
    Rng b = Rng::substream(o.seed, 600 + i);
    it_nd[i] = static_cast<double>(iterations_to_travel(nondeg, fam, theta0, alpha, kC5Arclength, cap, a));
    it_d[i] = static_cast<double>(iterations_to_travel(deg, fam, theta0, alpha, kC5Arclength, cap, b));
  }, o.parallel);
  const double m_nd = median(it_nd), m_d = median(it_d);
  const double ratio = m_d / m_nd;
  int censored = 0;
  for (double v : it_d) censored += v >= static_cast<double>(cap);
  r.pass = ratio >= kC5MinRatio;
  r.measured = {{"median_nondegenerate", m_nd}, {"median_degenerate", m_d}, {"ratio", ratio},
                {"censored_degenerate", censored}, {"iterations_nondegenerate", it_nd},
                {"iterations_degenerate", it_d}};
  char buf[200];
  std::snprintf(buf, sizeof buf, "median iterations %.0f (degenerate) / %.0f (non-degenerate) = %.2f >= %.0f",
                m_d, m_nd, ratio, kC5MinRatio);
  r.summary = buf;
  return r;
}

// ---- 6 -------------------------------------------------------------------

Vec olm_start(const Vec& w_star, std::uint64_t seed, double scale) {
  Rng rng(seed);
  return w_star + scale * rng.normal_vec(static_cast<int>(w_star.size()));
}

CriterionResult c6(const AcceptOptions& o) {
  CriterionResult r = named(6, "minibatch triviality");
  const InterpolatingProblem prob = make_interpolating_olm(kOlmN, kOlmD, kOlmSeed);
  const Predictor pred = olm_predictor(kOlmD);
  const SmoothLoss L = mse_empirical_loss(pred, prob.data);
  const NoisyLoss mb = minibatch(pred, prob.data, 4);
  const NoisyLoss ln = label_noise(pred, prob.data);
  const NoiseFamily mb_fam = *mb.builtin_noise;
  const NoiseFamily ln_fam = gaussian_noise(1.0, kOlmN);
  const double alpha = 0.05;
  const double s2 = mb_fam.sigma * mb_fam.sigma;
  const long iters = std::lround(1.0 / (alpha * alpha * s2));
  const Vec w0 = olm_start(prob.w_star, 61, 1e-2);
  const Vec phi0 = limit_map_phi(L, w0);
  const int n_seeds = o.quick ? 5 : 20;
  std::vector<double> d_mb(n_seeds), d_ln(n_seeds);
  parallel_for(n_seeds, [&](int i) {
    Rng a = Rng::substream(o.seed, 700 + i);
    Rng b = Rng::substream(o.seed, 800 + i);
    d_mb[i] = (limit_map_phi(L, noisy_gd_final(mb, mb_fam, w0, alpha, iters, a)) - phi0).norm();
    d_ln[i] = (limit_map_phi(L, noisy_gd_final(ln, ln_fam, w0, alpha, iters, b)) - phi0).norm();
  }, o.parallel);
  const double ratio = median(d_mb) / median(d_ln);
  const TimescaleReport ts = timescale_classify(mb, {prob.w_star, phi0});
  r.pass = ratio < kC6MaxRatio && ts.verdict == Timescale::trivial;
  r.measured = {{"iterations", iters}, {"minibatch_sigma2", s2},
                {"median_displacement_minibatch", median(d_mb)},
                {"median_displacement_label_noise", median(d_ln)}, {"ratio", ratio},
                {"verdict", to_string(ts.verdict)}, {"reg_grad_sup", ts.reg_grad_sup},
                {"tangent_noise_sup", ts.tangent_noise_sup}, {"sigma_drift_sup", ts.sigma_drift_sup}};
  char buf[200];
  std::snprintf(buf, sizeof buf, "displacement ratio %.3g < %.2g over %ld iterations; verdict %s",
                ratio, kC6MaxRatio, iters, to_string(ts.verdict).c_str());
  r.summary = buf;
  return r;
}

// ---- 7 / 8 ---------------------------------------------------------------

struct OlmFlowSetup {
  InterpolatingProblem prob;
  Predictor pred;
  SmoothLoss L;
  Vec w0;
  Vec y0;
};

OlmFlowSetup olm_flow_setup() {
  OlmFlowSetup s;
  s.prob = make_interpolating_olm(kOlmN, kOlmD, kOlmSeed);
  s.pred = olm_predictor(kOlmD);
  s.L = mse_empirical_loss(s.pred, s.prob.data);
  s.w0 = s.prob.w_star;
  s.y0 = limit_map_phi(s.L, s.w0);
  return s;
}

Trajectory label_noise_flow(const OlmFlowSetup& s, double T, int records) {
  ConstrainedOptions co;
  co.n_records = records;
  co.dt = T / (10.0 * (records - 1));
  return constrained_gradient_flow(s.L, reg_label_noise(s.L, kOlmN).gradient, s.y0, T, co);
}

CriterionResult c7(const AcceptOptions& o) {
  CriterionResult r = named(7, "label-noise limit flow");
  const OlmFlowSetup s = olm_flow_setup();
  const NoisyLoss ln = label_noise(s.pred, s.prob.data);
  const double alpha = 0.02, sigma = 0.5, T = 2.0;
  ScalePlan plan{alpha, sigma, Regime::degenerate, T};
  const long n = plan.n_steps();
  const Trajectory flow = label_noise_flow(s, T, 201);
  const Vec yT = flow.points.back();
  const int n_seeds = o.quick ? 5 : 20;
  std::vector<double> d_phi(n_seeds), d_raw(n_seeds);
  parallel_for(n_seeds, [&](int i) {
    Rng rng = Rng::substream(o.seed, 900 + i);
    const Vec wT = noisy_gd_final(ln, gaussian_noise(sigma, kOlmN), s.w0, alpha, n, rng);
    d_raw[i] = (wT - yT).norm();
    d_phi[i] = (limit_map_phi(s.L, wT) - yT).norm();
  }, o.parallel);
  const double med = median(d_phi);
  r.pass = med < kC7DistTol;
  r.measured = {{"steps", n}, {"flow_displacement", (yT - s.y0).norm()},
                {"median_phi_distance", med}, {"median_raw_distance", median(d_raw)},
                {"phi_distance", d_phi}, {"raw_distance", d_raw}};
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "median |Phi(w_T) - Y(T)| = %.3g < %.2g (flow moved %.3g; raw iterate distance %.3g)",
                med, kC7DistTol, (yT - s.y0).norm(), median(d_raw));
  r.summary = buf;
  return r;
}

CriterionResult c8(const AcceptOptions& o) {
  CriterionResult r = named(8, "combined-constant resolution");
  const OlmFlowSetup s = olm_flow_setup();
  const NoisyLoss comb = label_plus_minibatch(s.pred, s.prob.data);
  const NoiseFamily fam = product_noise({gaussian_noise(1.0, kOlmN), minibatch_noise(kOlmN, kOlmN / 2)});
  const double alpha = 0.01, T = 1.0;
  ScalePlan plan{alpha, 1.0, Regime::degenerate, T};
  const long n = plan.n_steps();
  const double s_max = 3.0 * T;
  const int records = 3001;
  const Trajectory flow = label_noise_flow(s, s_max, records);
  const int n_seeds = o.quick ? 5 : 20;
  std::vector<double> ratio(n_seeds), miss(n_seeds);
  parallel_for(n_seeds, [&](int i) {
    Rng rng = Rng::substream(o.seed, 1000 + i);
    const Vec z = limit_map_phi(s.L, noisy_gd_final(comb, fam, s.w0, alpha, n, rng));
    // Time matching: closest point on the reference path, refined by a
    // projection onto the local segment.
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < flow.size(); ++k) {
      const double d = (flow.points[k] - z).norm();
      if (d < bd) bd = d, best = k;
    }
    const std::size_t k0 = best == 0 ? 0 : best - 1;
    const std::size_t k1 = std::min(best + 1, flow.size() - 1);
    const Vec seg = flow.points[k1] - flow.points[k0];
    double u = seg.squaredNorm() > 0 ? (z - flow.points[k0]).dot(seg) / seg.squaredNorm() : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double t = flow.times[k0] + u * (flow.times[k1] - flow.times[k0]);
    ratio[i] = t / T;
    miss[i] = (flow.points[k0] + u * seg - z).norm();
  }, o.parallel);
  double mean = 0.0, var = 0.0;
  for (double v : ratio) mean += v;
  mean /= n_seeds;
  for (double v : ratio) var += (v - mean) * (v - mean);
  var /= (n_seeds - 1);
  const double half = kC8Z * std::sqrt(var / n_seeds);
  const double lo = mean - half, hi = mean + half;
  const double c_sqrt = std::sqrt(2.0), c_lin = 2.0;
  const bool lin_matches = std::abs(mean - c_lin) < std::abs(mean - c_sqrt);
  const double other = lin_matches ? c_sqrt : c_lin;
  r.pass = !(lo <= other && other <= hi) && flow.points.back() != s.y0;
  r.measured = {{"steps", n}, {"speed_ratio_mean", mean}, {"ci95", {lo, hi}},
                {"matched_constant", lin_matches ? "(1+s0^2)/(2N)" : "sqrt(1+s0^2)/(2N)"},
                {"ratios", ratio}, {"path_miss", miss}, {"median_path_miss", median(miss)}};
  char buf[220];
  std::snprintf(buf, sizeof buf, "speed ratio %.3f, CI [%.3f, %.3f]; matches %s, excludes %.4g",
                mean, lo, hi, lin_matches ? "2 (linear constant)" : "sqrt2", other);
  r.summary = buf;
  return r;
}

// ---- 9 -------------------------------------------------------------------

double variance_slope(const std::vector<std::vector<double>>& disp, const std::vector<double>& t,
                      std::vector<double>* mean_out) {
  const std::size_t np = disp.size(), nt = t.size();
  double num = 0.0, den = 0.0;
  mean_out->assign(nt, 0.0);
  for (std::size_t k = 0; k < nt; ++k) {
    double m = 0.0, v = 0.0;
    for (std::size_t p = 0; p < np; ++p) m += disp[p][k];
    m /= np;
    for (std::size_t p = 0; p < np; ++p) v += (disp[p][k] - m) * (disp[p][k] - m);
    v /= (np - 1);
    (*mean_out)[k] = m;
    num += t[k] * v;
    den += t[k] * t[k];
  }
  return num / den;
}

CriterionResult c9(const AcceptOptions& o) {
  CriterionResult r = named(9, "SGLD constrained SDE");
  const SmoothLoss L = ring_sine_loss();
  const NoisyLoss Lh = sgld(L);
  const double alpha = 0.02, sigma = 1.0, T = 1.0, theta0 = 1.0;
  const NoiseFamily fam = gaussian_noise(sigma, 2);
  ScalePlan plan{alpha, sigma, Regime::degenerate, T};
  const long n = plan.n_steps();
  const int block = 5;  // discrete steps per SDE step
  const int n_grid = 51;
  const std::vector<double> grid = uniform_grid(T, n_grid);
  const int n_paths = o.quick ? 100 : 200;
  const Vec y0 = ring::point(theta0);
  std::vector<std::vector<double>> dd(n_paths), dc(n_paths);
  // Control variate: the leading noise term -alpha/2 t(theta0).sum(eta_k) of
  // the angular displacement. It has mean zero exactly and is shared by both
  // ensembles, so subtracting it sharpens the drift estimate without bias.
  std::vector<double> cv(n_paths);
  const Vec t0 = ring::point(theta0 + std::numbers::pi / 2);
  GdOptions go;
  go.record_at = record_steps(plan, grid);
  ConstrainedOptions co;
  co.n_records = n_grid;
  co.dt = block * plan.clock_unit();
  parallel_for(n_paths, [&](int i) {
    const std::uint64_t seed = Rng::substream(o.seed, 2000 + i).next_u64();
    Rng rng(seed);
    const Trajectory tr = noisy_gd(Lh, fam, y0, alpha, n, rng, go);
    const Trajectory w = rescaled_process(tr, plan, grid);
    // SDE driven by the same draws: db = -alpha * (sum of eta over the block).
    Rng replay(seed);
    Rng unused(0);
    IncrementSource inc = [&](long, int d, double) {
      Vec db = Vec::Zero(d);
      for (int b = 0; b < block; ++b) db -= alpha * sample(fam, replay);
      return db;
    };
    const Trajectory y = constrained_sde(L, *Lh.parts, 1.0, y0, T, unused, co, inc);
    auto disp = [&](const Trajectory& t) {
      std::vector<double> a = unwrapped_angles(t.points);
      for (double& v : a) v -= theta0;
      return a;
    };
    dd[i] = disp(w);
    dc[i] = disp(y);
    Rng again(seed);
    double c = 0.0;
    for (long k = 0; k < n; ++k) c += t0.dot(sample(fam, again));
    cv[i] = -0.5 * alpha * c;
  }, o.parallel);
  std::vector<double> mean_d, mean_c;
  const double slope_d = variance_slope(dd, grid, &mean_d);
  const double slope_c = variance_slope(dc, grid, &mean_c);
  const double rel = std::abs(slope_d / slope_c - 1.0);
  // Expected tangential drift -1/16 d/dtheta log|H|_+ at theta0.
  auto logdet = [&](double th) { return log_pseudo_determinant(L.hessian(ring::point(th)), 1e-3); };
  const double expected_drift = -0.0625 * (logdet(theta0 + 1e-4) - logdet(theta0 - 1e-4)) / 2e-4;
  double drift_d = 0.0, drift_c = 0.0, var_c = 0.0;
  for (int i = 0; i < n_paths; ++i) {
    drift_d += (dd[i].back() - cv[i]) / n_paths;
    drift_c += (dc[i].back() - cv[i]) / n_paths;
  }
  for (int i = 0; i < n_paths; ++i) var_c += std::pow(dc[i].back() - cv[i] - drift_c, 2) / (n_paths - 1);
  const double se_c = std::sqrt(var_c / n_paths);
  const bool sign_ok = std::signbit(drift_d) == std::signbit(drift_c) &&
                       std::signbit(drift_c) == std::signbit(expected_drift);
  r.pass = rel < kC9SlopeTol && sign_ok;
  r.measured = {{"paths", n_paths}, {"slope_discrete", slope_d}, {"slope_sde", slope_c},
                {"slope_rel_diff", rel}, {"slope_expected", 0.25},
                {"mean_disp_discrete_T", mean_d.back()}, {"mean_disp_sde_T", mean_c.back()},
                {"drift_discrete_cv", drift_d}, {"drift_sde_cv", drift_c}, {"drift_sde_cv_se", se_c},
                {"expected_drift_rate", expected_drift}};
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "variance slopes %.4f (GD) vs %.4f (SDE), rel diff %.3f < %.2f; drift %.4f vs %.4f "
                "(+-%.4f, expected sign of %.4f)",
                slope_d, slope_c, rel, kC9SlopeTol, drift_d, drift_c, se_c, expected_drift);
  r.summary = buf;
  return r;
}

// ---- 10 ------------------------------------------------------------------

CriterionResult c10(const AcceptOptions& o) {
  CriterionResult r = named(10, "noise decay");
  const double sigma = 0.1;
  Mat C(2, 2);
  C << 1.0, 0.5, 0.5, 1.0;
  const std::vector<std::pair<std::string, NoiseFamily>> fams = {
      {"gaussian-1d", gaussian_noise(sigma, 1)},
      {"gaussian-2d", gaussian_noise(sigma, 2)},
      {"gaussian-correlated-2d", correlated_gaussian_noise(sigma * sigma * C)}};
  const std::vector<double> alphas = {0.1, 0.05, 0.025};
  const int streams = o.quick ? 10 : 50;
  Json rows = Json::array();
  bool all = true;
  std::string line;
  int fi = 0;
  for (const auto& [name, fam] : fams) {
    std::vector<double> meds;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      std::vector<double> sup(streams);
      parallel_for(streams, [&](int s) {
        Rng rng = Rng::substream(o.seed, 3000 + 1000 * fi + 100 * a + s);
        sup[s] = noise_decay_check(fam, alphas[a], sigma, 2.0, 1.0, rng);
      }, o.parallel);
      meds.push_back(median(sup));
    }
    const bool dec = meds[0] > meds[1] && meds[1] > meds[2];
    all = all && dec;
    rows.push_back({{"family", name}, {"alphas", alphas}, {"median_sup", meds}, {"decreasing", dec}});
    char b[96];
    std::snprintf(b, sizeof b, "%s%s %.3g>%.3g>%.3g", line.empty() ? "" : "; ", name.c_str(), meds[0], meds[1], meds[2]);
    line += b;
    ++fi;
  }
  r.pass = all;
  r.measured = {{"families", rows}, {"streams", streams}};
  r.summary = "median sup alpha|eta|^2: " + line;
  return r;
}

// ---- 11 ------------------------------------------------------------------

struct Check {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  [[nodiscard]] bool ok() const { return std::isfinite(value) && value <= tol; }
};

double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1e-12, b.norm()); }

CriterionResult c11(const AcceptOptions& o) {
  CriterionResult r = named(11, "invariant suites");
  std::vector<Check> checks;
  Rng rng = Rng::substream(o.seed, 11);
  const SmoothLoss ring = ring_sine_loss();
  const InterpolatingProblem olm = make_interpolating_olm(4, 3, 3);
  const Predictor olm_pred = olm_predictor(3);
  const SmoothLoss olm_L = mse_empirical_loss(olm_pred, olm.data);
  const Scenario sh = build_scenario(
      {{"loss", {{"id", "mse-shallow"}, {"n_hidden", 3},
                 {"data", {{"synthetic", "shallow"}, {"n", 4}, {"d_in", 3}, {"seed", 24}}}}},
       {"scheme", "dropout-shallow"}});
  const std::vector<int> dims = {3, 3, 2, 1};
  const Dataset deep_data = sh.data.value();
  const Predictor deep_pred = deep_nn_predictor(dims);
  const SmoothLoss deep_L = mse_empirical_loss(deep_pred, deep_data);

  struct Named {
    std::string name;
    SmoothLoss L;
  };
  const std::vector<Named> losses = {{"ring", ring}, {"olm", olm_L}, {"shallow", sh.loss}, {"deep", deep_L}};

  // Gradient and Hessian against finite differences.
  double g_err = 0.0, h_err = 0.0;
  for (const auto& [name, L] : losses) {
    for (int k = 0; k < 10; ++k) {
      const Vec w = 0.5 * rng.normal_vec(L.dim) + Vec::Constant(L.dim, 0.5);
      g_err = std::max(g_err, rel_err(L.gradient(w), fd::gradient(L.value, w)));
      const Mat Hfd = fd::hessian_from_gradient(L.gradient, w);
      h_err = std::max(h_err, (L.hessian(w) - Hfd).norm() / std::max(1e-12, Hfd.norm()));
    }
  }
  checks.push_back({"loss gradient vs finite differences (rel)", g_err, 1e-6});
  checks.push_back({"loss Hessian vs finite differences (rel)", h_err, 1e-5});

  // Schemes: L^(w, 0) = L(w) exactly; grad_w against finite differences.
  std::vector<NoisyLoss> schemes = {
      anti_pgd(ring), drop_connect(ring), drop_connect(ring, NoiseKind::bernoulli_dropout), sgld(ring),
      cosine_modulated_quadratic(ring), norm_linear(ring), label_noise(olm_pred, olm.data),
      minibatch(olm_pred, olm.data, 2), label_plus_minibatch(olm_pred, olm.data),
      dropout_olm(3, olm.data), sh.scheme, dropout_deep(dims, deep_data)};
  double consist = 0.0, sg_err = 0.0;
  for (const auto& s : schemes) {
    for (int k = 0; k < 10; ++k) {
      const Vec w = 0.5 * rng.normal_vec(s.base.dim) + Vec::Constant(s.base.dim, 0.5);
      consist = std::max(consist, std::abs(s.value(w, Vec::Zero(s.noise_dim)) - s.base.value(w)));
      const Vec eta = 0.1 * rng.normal_vec(s.noise_dim);
      const Vec g = s.grad_w(w, eta);
      const Vec gfd = fd::gradient([&](const Vec& v) { return s.value(v, eta); }, w);
      sg_err = std::max(sg_err, rel_err(g, gfd));
    }
  }
  checks.push_back({"L^(w,0) = L(w) (abs, exact)", consist, 0.0});
  checks.push_back({"scheme grad_w vs finite differences (rel)", sg_err, 1e-6});

  // Projector algebra and Phi idempotence on the ring and OLM.
  double proj = 0.0, idem = 0.0, onman = 0.0;
  std::vector<std::pair<const SmoothLoss*, Vec>> starts;
  for (int k = 0; k < 5; ++k) {
    starts.push_back({&ring, ring::point(6.0 * rng.uniform()) * (1.0 + 0.2 * (rng.uniform() - 0.5))});
    starts.push_back({&olm_L, Vec(olm.w_star + 0.05 * rng.normal_vec(olm_L.dim))});
  }
  for (const auto& [Lp, x] : starts) {
    const Vec y = limit_map_phi(*Lp, x);
    onman = std::max(onman, Lp->gradient(y).norm());
    idem = std::max(idem, (limit_map_phi(*Lp, y) - y).norm());
    const ProjectorPair pp = tangent_projector(*Lp, y);
    const Mat H = Lp->hessian(y);
    const Mat I = Mat::Identity(H.rows(), H.cols());
    proj = std::max({proj, (pp.P * pp.P - pp.P).norm(), (pp.P - pp.P.transpose()).norm(),
                     (pp.P + pp.Q - I).norm(), (H * pp.P).norm() / H.norm()});
  }
  checks.push_back({"projector algebra (P^2=P, P=P^T, P+Q=I, HP=0)", proj, 1e-8});
  checks.push_back({"Phi lands on Gamma (|grad L|)", onman, 1e-8});
  checks.push_back({"Phi idempotence", idem, 1e-8});

  // Closed-form vs numeric Reg at 20 on-manifold points per scheme.
  struct RegPair {
    std::string name;
    NoisyLoss scheme;
    std::function<Vec(Rng&)> point;
    double h = 0.0;  // eta step; 0 picks the default
  };
  auto ring_pt = [](Rng& g) { return ring::point(6.2831853 * g.uniform()); };
  const SmoothLoss olm_loss = olm_L;
  const Vec ws = olm.w_star;
  auto olm_pt = [olm_loss, ws](Rng& g) { return limit_map_phi(olm_loss, Vec(ws + 0.1 * g.normal_vec(ws.size()))); };
  const SmoothLoss sh_loss = sh.loss;
  const Vec shw = sh.w0;
  auto sh_pt = [sh_loss, shw](Rng& g) { return limit_map_phi(sh_loss, Vec(shw + 0.05 * g.normal_vec(shw.size()))); };
  // The ring loss is not polynomial in eta, so its second differences need a
  // smaller step than the default to reach 1e-5.
  const std::vector<RegPair> pairs = {{"anti-pgd", anti_pgd(ring), ring_pt, 2e-4},
                                      {"gaussian-dropconnect", drop_connect(ring), ring_pt, 2e-4},
                                      {"modulated-quadratic", cosine_modulated_quadratic(ring), ring_pt},
                                      {"dropout-olm", dropout_olm(3, olm.data), olm_pt},
                                      {"dropout-shallow", sh.scheme, sh_pt}};
  for (const auto& p : pairs) {
    const RegFunctional closed = analytic_reg(p.scheme);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Vec w = p.point(rng);
      const double c = closed.value(w), nv = numeric_reg_value(p.scheme, w, p.h);
      worst = std::max(worst, std::abs(c - nv) / std::max(1e-12, std::abs(c)));
    }
    checks.push_back({"Reg closed form vs numeric: " + p.name, worst, kC11RegRelTol});
  }
  // Label-noise regularizer on OLM: (1/2N) Laplacian against the explicit
  // sum 4/N^2 sum_ij (u_j^2 + v_j^2) x_ij^2 and a finite-difference Laplacian.
  double printed_ratio = 0.0;
  {
    const int N = olm.data.size(), d = olm.data.dim_in();
    const RegFunctional ln = reg_label_noise(olm_L, N);
    double worst = 0.0, worst_fd = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Vec w = olm_pt(rng);
      double sum = 0.0;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < d; ++j)
          sum += (w(j) * w(j) + w(d + j) * w(d + j)) * olm.data.inputs(i, j) * olm.data.inputs(i, j);
      const double v = ln.value(w);
      worst = std::max(worst, std::abs(v - 4.0 / (N * N) * sum));
      worst_fd = std::max(worst_fd, std::abs(v - fd::laplacian(olm_L.value, w, 1e-3) / (2.0 * N)));
      printed_ratio = v / (2.0 / (N * N) * sum);
    }
    checks.push_back({"label-noise Reg on OLM vs explicit sum (abs)", worst, kC11LaplacianTol});
    checks.push_back({"label-noise Reg on OLM vs finite-difference Laplacian (abs)", worst_fd, 1e-5});
  }

  bool all = true;
  Json rows = Json::array();
  int failed = 0;
  std::string fails;
  for (const auto& c : checks) {
    all = all && c.ok();
    if (!c.ok()) {
      ++failed;
      fails += (fails.empty() ? "" : ", ") + c.name;
    }
    rows.push_back({{"check", c.name}, {"value", c.value}, {"tol", c.tol}, {"pass", c.ok()}});
  }
  r.pass = all;
  r.measured = {{"checks", rows}, {"label_noise_reg_over_2_N2_sum", printed_ratio}};
  r.summary = std::to_string(checks.size() - failed) + "/" + std::to_string(checks.size()) + " invariant checks green" +
              (fails.empty() ? "" : " (failed: " + fails + ")");
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptOptions& opts) {
  const auto t0 = Clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = c1(opts); break;
      case 2: r = c2(opts); break;
      case 3: r = c3(opts); break;
      case 4: r = c4(opts); break;
      case 5: r = c5(opts); break;
      case 6: r = c6(opts); break;
      case 7: r = c7(opts); break;
      case 8: r = c8(opts); break;
      case 9: r = c9(opts); break;
      case 10: r = c10(opts); break;
      case 11: r = c11(opts); break;
      default: throw ConfigError("criterion id must be 1.." + std::to_string(kNumCriteria));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    r = named(id, "criterion " + std::to_string(id));
    r.pass = false;
    r.summary = std::string("error: ") + e.what();
  }
  r.smoke = opts.quick;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptOptions& opts, const std::vector<int>& ids) {
  std::vector<int> todo = ids;
  if (todo.empty())
    for (int i = 1; i <= kNumCriteria; ++i) todo.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : todo) out.push_back(run_criterion(id, opts));
  return out;
}

std::string format_line(const CriterionResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1f s)", r.seconds);
  return "C" + std::to_string(r.id) + (r.pass ? " PASS " : " FAIL ") + (r.smoke ? "[smoke] " : "") + r.name +
         ": " + r.summary + buf;
}

Json to_json(const CriterionResult& r) {
  return {{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"smoke", r.smoke},
          {"seconds", r.seconds}, {"summary", r.summary}, {"measured", r.measured}};
}

}  // namespace nglab
