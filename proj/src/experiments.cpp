#include "nglab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>

namespace nglab {

namespace ring {

double angle(const Vec& w) { return std::atan2(w(1), w(0)); }

double angular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

Vec point(double theta) { return Vec{{std::cos(theta), std::sin(theta)}}; }

double anti_pgd_reg(double theta) { return 1.0 + 0.7 * std::sin(5.0 * std::cos(theta)); }

double descend_minimizer(const std::function<double(double)>& f, double theta0, int n_scan) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double step = two_pi / n_scan;
  auto at = [&](long i) { return f(step * static_cast<double>(((i % n_scan) + n_scan) % n_scan)); };
  long i = std::lround(theta0 / step);
  // Walk downhill over the scan; the bound guards against flat functions.
  for (int guard = 0; guard < n_scan; ++guard) {
    const double c = at(i), l = at(i - 1), r = at(i + 1);
    if (l < c && l <= r) --i;
    else if (r < c) ++i;
    else break;
  }
  double a = step * static_cast<double>(i - 1), b = step * static_cast<double>(i + 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  double th = std::fmod(0.5 * (a + b), two_pi);
  if (th > std::numbers::pi) th -= two_pi;
  if (th <= -std::numbers::pi) th += two_pi;
  return th;
}

}  // namespace ring

void parallel_for(int n, const std::function<void(int)>& fn, bool parallel) {
  std::exception_ptr err;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

namespace {
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}
}  // namespace

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

std::pair<double, double> iqr(std::vector<double> v) {
  return {quantile(v, 0.25), quantile(v, 0.75)};
}

// ---------------------------------------------------------------------------
// Scenario parsing

std::function<bool(const Vec&)> RegionSpec::predicate() const {
  if (kind == "none") return {};
  const double lo = r_min, hi = r_max;
  if (kind == "annulus") return [lo, hi](const Vec& w) { const double r = w.norm(); return r >= lo && r <= hi; };
  if (kind == "ball") return [hi](const Vec& w) { return w.norm() <= hi; };
  throw ConfigError("unknown region kind '" + kind + "'");
}

std::vector<std::string> known_losses() {
  return {"ring-sine", "quadratic", "mse-olm", "mse-shallow", "mse-deep"};
}

std::vector<std::string> known_schemes() {
  return {"anti-pgd",       "drop-connect",    "sgld",          "label-noise",
          "minibatch",      "label+minibatch", "dropout-olm",   "dropout-shallow",
          "dropout-deep",   "modulated-quadratic", "norm-linear"};
}

namespace {

template <class T>
T opt(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

// Object form of an id-or-object field.
Json normalized(const Json& j) {
  if (j.is_string()) return Json{{"id", j.get<std::string>()}};
  if (!j.is_object() || !j.contains("id")) throw ConfigError("expected an id string or an object with 'id'");
  return j;
}

Vec to_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat to_mat(const Json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ConfigError("empty matrix");
  Mat M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ConfigError("ragged matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) M(i, k) = rows[i][k];
  }
  return M;
}

struct DataLoss {
  Predictor pred;
  Dataset data;
  std::optional<Vec> w_star;
  std::vector<int> dims;  // deep only
  int n_hidden = 0;
};

DataLoss build_data_loss(const std::string& id, const Json& lj) {
  DataLoss out;
  if (!lj.contains("data")) throw ConfigError("loss '" + id + "' needs a 'data' entry");
  const Json& dj = lj.at("data");
  const int n_hidden = opt(lj, "n_hidden", 3);
  if (dj.contains("path")) {
    out.data = load_dataset_csv(dj.at("path").get<std::string>());
  } else if (dj.contains("synthetic")) {
    const std::string kind = dj.at("synthetic").get<std::string>();
    const int n = opt(dj, "n", kind == "shallow" ? 4 : 8);
    const int d_in = opt(dj, "d_in", kind == "shallow" ? 3 : 6);
    const auto seed = opt<std::uint64_t>(dj, "seed", kind == "shallow" ? 24 : 1);
    InterpolatingProblem prob;
    if (kind == "olm") {
      prob = make_interpolating_olm(n, d_in, seed, opt(dj, "lambda_max", 4.0));
    } else if (kind == "shallow") {
      prob = make_interpolating_shallow(n, d_in, n_hidden, seed);
    } else {
      throw ConfigError("unknown synthetic data '" + kind + "'");
    }
    out.data = prob.data;
    if ((kind == "olm" && id == "mse-olm") || (kind == "shallow" && id == "mse-shallow"))
      out.w_star = prob.w_star;
  } else {
    throw ConfigError("data needs 'path' or 'synthetic'");
  }
  out.data.validate();
  const int d_in = out.data.dim_in();
  if (id == "mse-olm") {
    out.pred = olm_predictor(d_in);
  } else if (id == "mse-shallow") {
    out.n_hidden = n_hidden;
    out.pred = shallow_nn_predictor(n_hidden, d_in);
  } else {
    out.dims = {d_in};
    for (int h : opt(lj, "hidden", std::vector<int>{4})) out.dims.push_back(h);
    out.dims.push_back(1);
    out.pred = deep_nn_predictor(out.dims);
  }
  return out;
}

Regime default_regime(const NoisyLoss& s) {
  return s.degenerate_class == DegenerateClass::degenerate_quadratic ? Regime::degenerate
                                                                     : Regime::nondegenerate;
}

}  // namespace

Scenario build_scenario(const Json& cfg) {
  try {
    Scenario sc;
    sc.config = cfg;
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    if (!cfg.contains("loss")) throw ConfigError("config needs 'loss'");
    if (!cfg.contains("scheme")) throw ConfigError("config needs 'scheme'");
    const Json lj = normalized(cfg.at("loss"));
    const Json sj = normalized(cfg.at("scheme"));
    sc.loss_id = lj.at("id").get<std::string>();
    sc.scheme_id = sj.at("id").get<std::string>();

    std::optional<DataLoss> dl;
    if (sc.loss_id == "ring-sine") {
      sc.loss = ring_sine_loss(opt(lj, "a", 0.7), opt(lj, "b", 5.0));
      sc.arclength = true;
    } else if (sc.loss_id == "quadratic") {
      if (!lj.contains("A")) throw ConfigError("quadratic loss needs 'A'");
      sc.loss = quadratic_loss(to_mat(lj.at("A")));
    } else if (sc.loss_id == "mse-olm" || sc.loss_id == "mse-shallow" || sc.loss_id == "mse-deep") {
      dl = build_data_loss(sc.loss_id, lj);
      sc.loss = mse_empirical_loss(dl->pred, dl->data);
      sc.data = dl->data;
    } else {
      throw ConfigError("unknown loss '" + sc.loss_id + "'");
    }

    auto need_data = [&](const char* what) -> const DataLoss& {
      if (!dl) throw ConfigError(std::string("scheme '") + what + "' needs a data loss");
      return *dl;
    };
    const std::string& s = sc.scheme_id;
    if (s == "anti-pgd") sc.scheme = anti_pgd(sc.loss);
    else if (s == "sgld") sc.scheme = sgld(sc.loss);
    else if (s == "drop-connect") sc.scheme = drop_connect(sc.loss, noise_kind_from_string(opt<std::string>(sj, "pairing", "gaussian")));
    else if (s == "modulated-quadratic") sc.scheme = cosine_modulated_quadratic(sc.loss);
    else if (s == "norm-linear") sc.scheme = norm_linear(sc.loss);
    else if (s == "label-noise") sc.scheme = label_noise(need_data("label-noise").pred, dl->data);
    else if (s == "minibatch")
      sc.scheme = minibatch(need_data("minibatch").pred, dl->data, opt(sj, "m_expect", std::max(1, dl->data.size() / 2)));
    else if (s == "label+minibatch") sc.scheme = label_plus_minibatch(need_data("label+minibatch").pred, dl->data);
    else if (s == "dropout-olm") {
      if (sc.loss_id != "mse-olm") throw ConfigError("dropout-olm needs loss mse-olm");
      sc.scheme = dropout_olm(dl->data.dim_in(), dl->data);
    } else if (s == "dropout-shallow") {
      if (sc.loss_id != "mse-shallow") throw ConfigError("dropout-shallow needs loss mse-shallow");
      sc.scheme = dropout_shallow(dl->n_hidden, dl->data.dim_in(), dl->data);
    } else if (s == "dropout-deep") {
      if (sc.loss_id != "mse-deep") throw ConfigError("dropout-deep needs loss mse-deep");
      sc.scheme = dropout_deep(dl->dims, dl->data, opt(sj, "layers", std::vector<int>{}));
    } else {
      throw ConfigError("unknown scheme '" + s + "'");
    }

    // Plan.
    const Json pj = cfg.value("plan", Json::object());
    sc.plan.alpha = opt(pj, "alpha", 0.1);
    sc.plan.sigma = opt(pj, "sigma", 0.1);
    if (pj.contains("regime")) {
      const std::string r = pj.at("regime").get<std::string>();
      if (r == "nondegenerate") sc.plan.regime = Regime::nondegenerate;
      else if (r == "degenerate") sc.plan.regime = Regime::degenerate;
      else throw ConfigError("regime must be nondegenerate or degenerate");
    } else {
      sc.plan.regime = default_regime(sc.scheme);
    }
    if (!(sc.plan.alpha > 0.0) || !(sc.plan.sigma > 0.0)) throw ConfigError("alpha and sigma must be > 0");
    if (pj.contains("steps")) {
      const long steps = pj.at("steps").get<long>();
      if (steps < 1) throw ConfigError("steps must be >= 1");
      sc.plan.horizon = static_cast<double>(steps) * sc.plan.clock_unit();
    } else {
      sc.plan.horizon = opt(pj, "T", 1.0);
    }
    sc.plan.validate();
    sc.grid_points = opt(cfg, "grid", 200);
    if (sc.grid_points < 2) throw ConfigError("grid must be >= 2");

    // Noise.
    const Json nj = cfg.value("noise", Json::object());
    const double ns = opt(nj, "sigma", sc.plan.sigma);
    const int nd = sc.scheme.noise_dim;
    if (sc.scheme.builtin_noise) {
      sc.noise = *sc.scheme.builtin_noise;
    } else if (s == "label+minibatch") {
      const int N = dl->data.size();
      const int m = opt(sj, "m_expect", std::max(1, N / 2));
      sc.noise = product_noise({gaussian_noise(ns, N), minibatch_noise(N, m)});
      // Ratio of the minibatch std to the label-noise std.
      sc.sigma0 = std::sqrt(static_cast<double>(N - m) / m) / ns;
    } else {
      const std::string kind = opt<std::string>(nj, "kind", "gaussian");
      if (kind == "gaussian") sc.noise = gaussian_noise(ns, nd);
      else if (kind == "uniform") sc.noise = uniform_noise(ns, nd);
      else if (kind == "bernoulli-dropout" || kind == "bernoulli")
        sc.noise = bernoulli_dropout_noise(opt(nj, "p", ns * ns / (1.0 + ns * ns)), nd);
      else if (kind == "gaussian-correlated") {
        if (!nj.contains("covariance")) throw ConfigError("correlated noise needs 'covariance'");
        sc.noise = correlated_gaussian_noise(to_mat(nj.at("covariance")));
      } else {
        throw ConfigError("unknown noise kind '" + kind + "'");
      }
    }
    sc.sigma0 = opt(cfg, "sigma0", sc.sigma0);
    sc.noise.validate();
    if (sc.noise.dim != nd) throw ConfigError("noise dimension does not match the scheme");

    // Initialization.
    if (cfg.contains("w0")) {
      sc.w0 = to_vec(cfg.at("w0"));
    } else if (sc.loss_id == "ring-sine") {
      sc.w0 = Vec{{0.3, 1.6}};
    } else if (dl && dl->w_star) {
      sc.w0 = *dl->w_star;
    } else {
      throw ConfigError("config needs 'w0' for this loss");
    }
    if (sc.w0.size() != sc.loss.dim) throw ConfigError("w0 has dimension " + std::to_string(sc.w0.size()) +
                                                       ", loss needs " + std::to_string(sc.loss.dim));

    // Seeds.
    if (cfg.contains("seeds")) {
      sc.seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      const int n = opt(cfg, "n_seeds", 1);
      const auto base = opt<std::uint64_t>(cfg, "seed", 1);
      for (int i = 0; i < n; ++i) sc.seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    if (sc.seeds.empty()) throw ConfigError("seeds must be nonempty");

    // Region K.
    if (cfg.contains("region")) {
      const Json& rj = cfg.at("region");
      sc.region.kind = opt<std::string>(rj, "kind", "none");
      sc.region.r_min = opt(rj, "r_min", 0.0);
      sc.region.r_max = opt(rj, "r_max", 0.0);
      (void)sc.region.predicate();
    } else if (sc.loss_id == "ring-sine") {
      sc.region = {"annulus", 0.5, 2.0};
    }

    const std::string outdir = opt<std::string>(cfg, "output", sc.loss_id + "_" + sc.scheme_id);
    const std::filesystem::path op(outdir);
    sc.output_dir = op.is_absolute() ? op : output_root() / op;
    return sc;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RegFunctional scenario_reg(const Scenario& sc) {
  switch (sc.scheme.tag) {
    case SchemeTag::label_noise:
      return reg_label_noise(sc.loss, sc.data->size());
    case SchemeTag::label_plus_minibatch:
      return reg_label_plus_minibatch(sc.loss, sc.data->size(), sc.sigma0,
                                      CombinedConstant::linear_form);
    default:
      break;
  }
  if (sc.scheme.analytic_reg) return analytic_reg(sc.scheme);
  return numeric_reg(sc.scheme);
}

// ---------------------------------------------------------------------------
// Commands

namespace {

DiagnosticOptions diagnostics(const Scenario& sc) {
  DiagnosticOptions d;
  if (sc.loss_id == "ring-sine") {
    d.dist_gamma = [](const Vec& w) { return std::abs(w.norm() - 1.0); };
    d.arclength = true;
  }
  return d;
}

bool is_ring(const Scenario& sc) { return sc.loss_id == "ring-sine"; }

double path_distance(const Scenario& sc, const Vec& a, const Vec& b) {
  return is_ring(sc) ? ring::angular_distance(ring::angle(a), ring::angle(b)) : (a - b).norm();
}

// Constrained flow recorded exactly on uniform_grid(T, n_grid).
Trajectory reference_flow(const Scenario& sc, const Vec& y0, double T, int n_grid) {
  ConstrainedOptions co;
  co.n_records = n_grid;
  const int sub = std::max(1, static_cast<int>(std::ceil(T / (n_grid - 1) / 1e-3)));
  co.dt = T / static_cast<double>((n_grid - 1) * sub);
  const RegFunctional reg = scenario_reg(sc);
  return constrained_gradient_flow(sc.loss, reg.gradient, y0, T, co);
}

}  // namespace

SimulateResult cmd_simulate(const Scenario& sc, bool write, bool parallel) {
  SimulateResult res;
  res.seeds.resize(sc.seeds.size());
  const long n = sc.plan.n_steps();
  std::vector<std::string> csv(sc.seeds.size());
  parallel_for(static_cast<int>(sc.seeds.size()), [&](int i) {
    Rng rng(sc.seeds[i]);
    GdOptions go;
    go.region = sc.region.predicate();
    Trajectory tr = noisy_gd(sc.scheme, sc.noise, sc.w0, sc.plan.alpha, n, rng, go);
    annotate(tr, sc.loss, diagnostics(sc));
    SeedOutcome& o = res.seeds[i];
    o.seed = sc.seeds[i];
    o.status = tr.status;
    o.steps = tr.last_step;
    o.final_point = tr.points.back();
    o.csv_file = "traj_seed" + std::to_string(sc.seeds[i]) + ".csv";
    csv[i] = trajectory_csv(tr);
  }, parallel);
  std::vector<std::pair<std::string, std::string>> outputs;
  for (std::size_t i = 0; i < csv.size(); ++i) outputs.emplace_back(res.seeds[i].csv_file, csv[i]);
  res.manifest = make_manifest("simulate", sc.config, sc.seeds.front(), outputs);
  Json per_seed = Json::array();
  for (const auto& o : res.seeds)
    per_seed.push_back({{"seed", o.seed}, {"status", to_string(o.status)}, {"steps", o.steps}});
  res.manifest["runs"] = per_seed;
  if (write) {
    for (std::size_t i = 0; i < csv.size(); ++i) write_text(sc.output_dir / res.seeds[i].csv_file, csv[i]);
    write_text(sc.output_dir / "manifest.json", res.manifest.dump(2) + "\n");
  }
  return res;
}

std::vector<Vec> default_probes(const Scenario& sc) {
  std::vector<Vec> out;
  if (is_ring(sc)) {
    for (int k = 0; k < 8; ++k) out.push_back(ring::point(0.1 + 2.0 * std::numbers::pi * k / 8.0));
    return out;
  }
  out.push_back(limit_map_phi(sc.loss, sc.w0));
  return out;
}

LimitFlowResult cmd_limit_flow(const Scenario& sc, bool write) {
  LimitFlowResult res;
  const Vec y0 = limit_map_phi(sc.loss, sc.w0);
  if (sc.region.kind != "none" && !sc.region.predicate()(y0))
    throw ConfigError("Phi(w0) is outside the region K");
  std::vector<Vec> probes = default_probes(sc);
  probes.push_back(y0);
  res.verdict = timescale_classify(sc.scheme, probes, 1e-6, sc.sigma0).verdict;
  const double T = sc.plan.horizon;
  switch (res.verdict) {
    case Timescale::trivial: {
      res.notice = "scheme is trivial on both clocks; the limit is constant";
      Trajectory tr;
      for (double t : uniform_grid(T, sc.grid_points)) tr.push(t, y0);
      res.paths.push_back(tr);
      break;
    }
    case Timescale::nondegenerate:
      res.paths.push_back(reference_flow(sc, y0, T, sc.grid_points));
      break;
    case Timescale::degenerate: {
      ConstrainedOptions co;
      co.n_records = sc.grid_points;
      co.dt = T / static_cast<double>((sc.grid_points - 1) * std::max(1, static_cast<int>(std::ceil(T / (sc.grid_points - 1) / 1e-3))));
      res.paths.resize(sc.seeds.size());
      for (std::size_t i = 0; i < sc.seeds.size(); ++i) {
        Rng rng(sc.seeds[i]);
        res.paths[i] = constrained_sde(sc.loss, *sc.scheme.parts, sc.sigma0, y0, T, rng, co);
      }
      break;
    }
    case Timescale::inconclusive:
      throw SchemeError("timescale verdict is inconclusive at the probe points");
  }
  if (write) {
    std::vector<std::pair<std::string, std::string>> outputs;
    for (std::size_t i = 0; i < res.paths.size(); ++i) {
      annotate(res.paths[i], sc.loss, diagnostics(sc));
      const std::string name = res.paths.size() == 1 ? "limit.csv"
                                                     : "limit_seed" + std::to_string(sc.seeds[i]) + ".csv";
      const std::string text = trajectory_csv(res.paths[i]);
      write_text(sc.output_dir / name, text);
      outputs.emplace_back(name, text);
    }
    Json m = make_manifest("limit-flow", sc.config, sc.seeds.front(), outputs);
    m["verdict"] = to_string(res.verdict);
    if (!res.notice.empty()) m["notice"] = res.notice;
    write_text(sc.output_dir / "limit_manifest.json", m.dump(2) + "\n");
  }
  return res;
}

Json ComparisonReport::to_json() const {
  Json lv = Json::array();
  for (const auto& l : levels) {
    std::vector<bool> ex(l.exited.begin(), l.exited.end());
    lv.push_back({{"alpha", l.alpha},
                  {"sigma", l.sigma},
                  {"sup_distance", l.sup_distance},
                  {"terminal_error", l.terminal_error},
                  {"exited", ex},
                  {"median_sup", l.median_sup},
                  {"iqr_sup", {l.iqr_sup.first, l.iqr_sup.second}}});
  }
  return {{"grid_points", grid.size()}, {"T", grid.empty() ? 0.0 : grid.back()},
          {"levels", lv}, {"decreasing", decreasing}};
}

ComparisonReport cmd_compare(const Scenario& sc, const std::vector<std::pair<double, double>>& levels,
                             bool parallel) {
  if (levels.size() < 2) throw ConfigError("compare needs at least 2 levels");
  ComparisonReport rep;
  const double T = sc.plan.horizon;
  rep.grid = uniform_grid(T, sc.grid_points);
  const PhiOptions phi_opts;
  const Vec y0 = limit_map_phi(sc.loss, sc.w0, phi_opts);
  const Trajectory ref = reference_flow(sc, y0, T, sc.grid_points);
  if (ref.size() != rep.grid.size()) throw NumericError("reference flow missed grid points");
  const auto region = sc.region.predicate();

  for (const auto& [alpha, sigma] : levels) {
    ScalePlan plan = sc.plan;
    plan.alpha = alpha;
    plan.sigma = sigma;
    NoiseFamily fam = sc.noise;
    if (fam.kind == NoiseKind::gaussian || fam.kind == NoiseKind::uniform) {
      fam.sigma = sigma;
    } else if (fam.kind == NoiseKind::bernoulli_dropout) {
      fam = bernoulli_dropout_noise(sigma * sigma / (1.0 + sigma * sigma), fam.dim);
    }
    const long n = plan.n_steps();
    GdOptions go;
    go.record_at = record_steps(plan, rep.grid);
    go.region = region;
    LevelReport lr;
    lr.alpha = alpha;
    lr.sigma = sigma;
    const std::size_t ns = sc.seeds.size();
    lr.sup_distance.assign(ns, 0.0);
    lr.terminal_error.assign(ns, 0.0);
    std::vector<char> exited(ns, 0);
    parallel_for(static_cast<int>(ns), [&](int i) {
      Rng rng(sc.seeds[i]);
      const Trajectory tr = noisy_gd(sc.scheme, fam, sc.w0, alpha, n, rng, go);
      if (tr.status != RunStatus::ok) {
        exited[i] = 1;
        lr.sup_distance[i] = lr.terminal_error[i] = std::numeric_limits<double>::infinity();
        return;
      }
      const Trajectory y = shifted_process(sc.loss, rescaled_process(tr, plan, rep.grid), plan, phi_opts);
      double sup = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) sup = std::max(sup, path_distance(sc, y.points[k], ref.points[k]));
      lr.sup_distance[i] = sup;
      lr.terminal_error[i] = path_distance(sc, y.points.back(), ref.points.back());
    }, parallel);
    lr.exited.assign(exited.begin(), exited.end());
    lr.median_sup = median(lr.sup_distance);
    lr.iqr_sup = iqr(lr.sup_distance);
    rep.levels.push_back(std::move(lr));
  }
  rep.decreasing = true;
  for (std::size_t i = 1; i < rep.levels.size(); ++i)
    rep.decreasing = rep.decreasing && rep.levels[i].median_sup < rep.levels[i - 1].median_sup;
  return rep;
}

Json cmd_reg_report(const Scenario& sc, const std::vector<Vec>& probes) {
  const RegFunctional numeric = numeric_reg(sc.scheme);
  std::optional<RegFunctional> closed;
  if (sc.scheme.analytic_reg) closed = analytic_reg(sc.scheme);
  Json rows = Json::array();
  for (const Vec& w : probes) {
    Json r;
    r["w"] = std::vector<double>(w.data(), w.data() + w.size());
    const double nv = numeric.value(w);
    const Vec ng = numeric.gradient(w);
    r["numeric"] = {{"value", nv}, {"gradient", std::vector<double>(ng.data(), ng.data() + ng.size())}};
    if (closed) {
      const double cv = closed->value(w);
      const Vec cg = closed->gradient(w);
      r["closed_form"] = {{"value", cv}, {"gradient", std::vector<double>(cg.data(), cg.data() + cg.size())}};
      r["value_rel_err"] = std::abs(cv - nv) / std::max(1e-12, std::abs(cv));
    }
    try {
      const ProjectorPair pp = tangent_projector(sc.loss, w);
      const Vec pg = pp.P * ng;
      r["tangent_gradient_norm"] = pg.norm();
    } catch (const OffManifoldError&) {
      r["tangent_gradient_norm"] = nullptr;
    }
    if (sc.scheme.parts) {
      const SpectralSplit split = spectral_split(sc.loss.hessian(w));
      const Mat S = degenerate_sigma(*sc.scheme.parts, w, sc.sigma0);
      const Vec drift = 0.5 * phi_second_derivative(split, third_derivative(sc.loss, w), S);
      r["degenerate_drift"] = std::vector<double>(drift.data(), drift.data() + drift.size());
    }
    rows.push_back(r);
  }
  const TimescaleReport ts = timescale_classify(sc.scheme, probes, 1e-6, sc.sigma0);
  return {{"scheme", sc.scheme.id},
          {"loss", sc.loss_id},
          {"provenance", closed ? "closed-form + numeric" : "numeric"},
          {"probes", rows},
          {"verdict", to_string(ts.verdict)},
          {"reg_grad_sup", ts.reg_grad_sup},
          {"tangent_noise_sup", ts.tangent_noise_sup},
          {"sigma_drift_sup", ts.sigma_drift_sup},
          {"notes", ts.notes},
          {"content_hash", config_hash(sc.config)}};
}

Json cmd_verify_phi(const SmoothLoss& L, const std::vector<Vec>& points) {
  PhiOptions tight;
  tight.tol_grad = 1e-12;
  tight.ode.tol = 1e-13;
  Json rows = Json::array();
  double jac_max = 0.0, lap_max = 0.0, hess_max = 0.0, printed_max = 0.0;
  for (const Vec& w : points) {
    const ProjectorPair pp = tangent_projector(L, w);
    const Mat J = phi_jacobian_fd(L, w, 1e-4, tight);
    const double jac_err = (J - pp.P).cwiseAbs().maxCoeff();
    const Vec lap = phi_laplacian_fd(L, w, 2e-3, tight);
    const IdentityTerms id = phi_second_derivative_identity(L, w);
    const double lap_err = (id.combined() - lap).cwiseAbs().maxCoeff();
    const double printed_err = ((id.normal_term - id.log_det_grad) - lap).cwiseAbs().maxCoeff();
    const Vec general = phi_second_derivative(L, w, L.hessian(w));
    const double hess_err = (general - phi_second_derivative_hessian(L, w)).cwiseAbs().maxCoeff();
    jac_max = std::max(jac_max, jac_err);
    lap_max = std::max(lap_max, lap_err);
    hess_max = std::max(hess_max, hess_err);
    printed_max = std::max(printed_max, printed_err);
    rows.push_back({{"w", std::vector<double>(w.data(), w.data() + w.size())},
                    {"jacobian_err", jac_err},
                    {"identity_err", lap_err},
                    {"identity_printed_coefficients_err", printed_err},
                    {"hessian_direction_err", hess_err}});
  }
  return {{"points", rows},
          {"jacobian_err_max", jac_max},
          {"identity_err_max", lap_max},
          {"identity_printed_coefficients_err_max", printed_max},
          {"hessian_direction_err_max", hess_max}};
}

}  // namespace nglab
