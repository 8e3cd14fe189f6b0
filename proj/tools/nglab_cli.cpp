// nglab: noisy gradient descent experiments on zero-loss manifolds.
//
// Exit codes: 0 success, 1 a check or criterion failed, 2 bad configuration.

#include "nglab/acceptance.hpp"
#include "nglab/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace nglab;

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

// Scenario flags shared by the simulation commands. Anything set here
// overrides the same key from --config.
struct ScenarioFlags {
  std::string config_path;
  std::string loss;
  std::string scheme;
  std::optional<double> alpha;
  std::optional<double> sigma;
  std::optional<double> horizon;
  std::optional<long> steps;
  std::string regime;
  std::vector<double> w0;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_seeds;
  std::string output;
  std::vector<std::string> sets;  // path=json
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& f) {
  cmd->add_option("-c,--config", f.config_path, "JSON scenario file");
  cmd->add_option("--loss", f.loss, "loss id");
  cmd->add_option("--scheme", f.scheme, "scheme id");
  cmd->add_option("--alpha", f.alpha, "step size");
  cmd->add_option("--sigma", f.sigma, "noise scale");
  cmd->add_option("-T,--horizon", f.horizon, "slow-time horizon");
  cmd->add_option("--steps", f.steps, "iteration count (overrides the horizon)");
  cmd->add_option("--regime", f.regime, "nondegenerate | degenerate");
  cmd->add_option("--w0", f.w0, "initial point")->delimiter(',');
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--n-seeds", f.n_seeds, "number of consecutive seeds");
  cmd->add_option("-o,--output", f.output, "output directory (relative to $NGLAB_OUTPUT_ROOT)");
  cmd->add_option("--set", f.sets, "override a config value: a.b.c=<json>");
}

Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return text;  // bare strings need no quotes
  }
}

Json scenario_config(const ScenarioFlags& f) {
  Json cfg = f.config_path.empty() ? Json::object() : load_json(f.config_path);
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  auto put_id = [&](const char* key, const std::string& id) {
    if (id.empty()) return;
    if (cfg.contains(key) && cfg[key].is_object()) cfg[key]["id"] = id;
    else cfg[key] = id;
  };
  put_id("loss", f.loss);
  put_id("scheme", f.scheme);
  for (const char* key : {"loss", "scheme"})
    if (cfg.contains(key) && cfg[key].is_string()) cfg[key] = Json{{"id", cfg[key]}};
  Json& plan = cfg["plan"];
  if (plan.is_null()) plan = Json::object();
  if (f.alpha) plan["alpha"] = *f.alpha;
  if (f.sigma) plan["sigma"] = *f.sigma;
  if (f.horizon) {
    plan["T"] = *f.horizon;
    plan.erase("steps");
  }
  if (f.steps) plan["steps"] = *f.steps;
  if (!f.regime.empty()) plan["regime"] = f.regime;
  if (!f.w0.empty()) cfg["w0"] = f.w0;
  if (f.seed) {
    cfg["seed"] = *f.seed;
    cfg.erase("seeds");
  }
  if (f.n_seeds) {
    cfg["n_seeds"] = *f.n_seeds;
    cfg.erase("seeds");
  }
  if (!f.output.empty()) cfg["output"] = f.output;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects path=value, got '" + s + "'");
    std::string path = "/" + s.substr(0, eq);
    for (auto& c : path)
      if (c == '.') c = '/';
    try {
      cfg[Json::json_pointer(path)] = parse_value(s.substr(eq + 1));
    } catch (const Json::exception& e) {
      throw ConfigError("--set " + s + ": " + e.what());
    }
  }
  return cfg;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string fmt_vec(const Vec& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

int run_simulate(const ScenarioFlags& f, bool serial) {
  const Scenario sc = build_scenario(scenario_config(f));
  const SimulateResult res = cmd_simulate(sc, true, !serial);
  int bad = 0;
  for (const auto& s : res.seeds) {
    std::cout << "seed " << s.seed << ": " << to_string(s.status) << " after " << s.steps
              << " steps, final " << fmt_vec(s.final_point) << " -> " << s.csv_file << "\n";
    if (s.status != RunStatus::ok) ++bad;
  }
  std::cout << "manifest " << (sc.output_dir / "manifest.json").string() << " hash "
            << res.manifest.at("content_hash").get<std::string>() << "\n";
  if (bad) std::cout << bad << " of " << res.seeds.size() << " seeds left the region or diverged\n";
  return 0;
}

int run_limit_flow(const ScenarioFlags& f) {
  const Scenario sc = build_scenario(scenario_config(f));
  const LimitFlowResult res = cmd_limit_flow(sc, true);
  std::cout << "verdict " << to_string(res.verdict) << "\n";
  if (!res.notice.empty()) std::cout << res.notice << "\n";
  for (std::size_t i = 0; i < res.paths.size(); ++i) {
    const auto& p = res.paths[i];
    std::cout << "path " << i << ": " << p.size() << " records, end " << fmt_vec(p.points.back())
              << " at t=" << fmt(p.times.back()) << "\n";
  }
  std::cout << "written to " << sc.output_dir.string() << "\n";
  return 0;
}

std::vector<std::pair<double, double>> parse_levels(const std::vector<std::string>& raw,
                                                    const ScalePlan& base) {
  std::vector<std::pair<double, double>> out;
  for (const auto& s : raw) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ConfigError("--level expects alpha,sigma, got '" + s + "'");
    try {
      out.emplace_back(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError("--level expects two numbers, got '" + s + "'");
    }
  }
  if (out.empty()) {
    // Halve (alpha, sigma) twice from the configured plan.
    double a = base.alpha, s = base.sigma;
    for (int i = 0; i < 3; ++i, a /= 2, s /= 2) out.emplace_back(a, s);
  }
  if (out.size() < 2) throw ConfigError("compare needs at least two levels");
  for (const auto& [a, s] : out)
    if (!(a > 0.0) || !(s > 0.0)) throw ConfigError("levels need alpha, sigma > 0");
  return out;
}

int run_compare(const ScenarioFlags& f, const std::vector<std::string>& raw_levels, bool serial) {
  const Json cfg = scenario_config(f);
  const Scenario sc = build_scenario(cfg);
  const auto levels = parse_levels(raw_levels, sc.plan);
  const ComparisonReport rep = cmd_compare(sc, levels, !serial);
  for (const auto& lv : rep.levels) {
    int exits = 0;
    for (bool e : lv.exited) exits += e;
    std::cout << "alpha " << fmt(lv.alpha) << " sigma " << fmt(lv.sigma) << ": median sup "
              << fmt(lv.median_sup) << " IQR [" << fmt(lv.iqr_sup.first) << ", "
              << fmt(lv.iqr_sup.second) << "]" << (exits ? ", exits " + std::to_string(exits) : "")
              << "\n";
  }
  Json out = rep.to_json();
  out["command"] = "compare";
  out["config"] = cfg;
  out["content_hash"] = config_hash(cfg);
  const auto path = sc.output_dir / "compare.json";
  write_text(path, out.dump(2) + "\n");
  std::cout << (rep.decreasing ? "medians decreasing" : "medians NOT decreasing") << "; report "
            << path.string() << "\n";
  return rep.decreasing ? 0 : kExitFail;
}

std::vector<Vec> parse_points(const std::vector<std::string>& raw) {
  std::vector<Vec> pts;
  for (const auto& s : raw) {
    std::vector<double> xs;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        xs.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("bad coordinate '" + tok + "' in point '" + s + "'");
      }
    }
    pts.push_back(Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size())));
  }
  return pts;
}

void check_dims(const std::vector<Vec>& pts, int dim) {
  for (const auto& p : pts)
    if (p.size() != dim)
      throw ConfigError("point " + fmt_vec(p) + " has dimension " + std::to_string(p.size()) +
                        ", loss expects " + std::to_string(dim));
}

int run_reg_report(const ScenarioFlags& f, const std::vector<std::string>& raw_probes) {
  const Scenario sc = build_scenario(scenario_config(f));
  auto probes = raw_probes.empty() ? default_probes(sc) : parse_points(raw_probes);
  check_dims(probes, sc.loss.dim);
  const Json rep = cmd_reg_report(sc, probes);
  const auto path = sc.output_dir / "reg_report.json";
  write_text(path, rep.dump(2) + "\n");
  std::cout << "scheme " << sc.scheme.id << " on " << sc.loss_id << ": verdict "
            << rep.at("verdict").get<std::string>() << ", " << probes.size() << " probes\n";
  for (const auto& r : rep.at("probes")) {
    std::cout << "  Reg numeric " << fmt(r.at("numeric").at("value").get<double>());
    if (r.contains("closed_form"))
      std::cout << ", closed form " << fmt(r.at("closed_form").at("value").get<double>())
                << ", rel err " << fmt(r.at("value_rel_err").get<double>());
    std::cout << "\n";
  }
  std::cout << "report " << path.string() << "\n";
  return 0;
}

struct PhiTolerances {
  double jacobian = 1e-4;
  double identity = 1e-3;
  double hessian = 1e-6;
};

int run_verify_phi(ScenarioFlags f, const std::vector<std::string>& raw_points,
                   const PhiTolerances& tol) {
  Json cfg = scenario_config(f);
  if (!cfg.contains("scheme")) cfg["scheme"] = "anti-pgd";  // only the loss matters here
  const Scenario sc = build_scenario(cfg);
  auto points = raw_points.empty() ? default_probes(sc) : parse_points(raw_points);
  check_dims(points, sc.loss.dim);
  Json rep = cmd_verify_phi(sc.loss, points);
  const double jac = rep.at("jacobian_err_max"), id = rep.at("identity_err_max"),
               hs = rep.at("hessian_direction_err_max");
  const bool pass = jac < tol.jacobian && id < tol.identity && hs < tol.hessian;
  rep["tolerances"] = {{"jacobian", tol.jacobian}, {"identity", tol.identity}, {"hessian", tol.hessian}};
  rep["pass"] = pass;
  rep["content_hash"] = config_hash(cfg);
  const auto path = sc.output_dir / "verify_phi.json";
  write_text(path, rep.dump(2) + "\n");
  std::cout << "jacobian vs P      " << fmt(jac) << " (< " << fmt(tol.jacobian) << ")\n"
            << "d2Phi[I] vs FD     " << fmt(id) << " (< " << fmt(tol.identity) << ")\n"
            << "d2Phi[H] vs -P/2   " << fmt(hs) << " (< " << fmt(tol.hessian) << ")\n"
            << (pass ? "PASS" : "FAIL") << "; report " << path.string() << "\n";
  return pass ? 0 : kExitFail;
}

int run_accept(const AcceptOptions& opts, const std::vector<int>& ids, const std::string& json_path) {
  for (int id : ids)
    if (id < 1 || id > kNumCriteria) throw ConfigError("criterion ids run from 1 to " + std::to_string(kNumCriteria));
  Json all = Json::array();
  bool ok = true;
  std::vector<int> order = ids;
  if (order.empty())
    for (int i = 1; i <= kNumCriteria; ++i) order.push_back(i);
  for (int id : order) {
    const CriterionResult r = run_criterion(id, opts);
    std::cout << format_line(r) << std::endl;
    ok = ok && r.pass;
    all.push_back(to_json(r));
  }
  const Json report = {{"command", "accept"},
                       {"seed", opts.seed},
                       {"mode", opts.quick ? "smoke" : "full"},
                       {"pass", ok},
                       {"criteria", all}};
  const std::filesystem::path path =
      json_path.empty() ? output_root() / "accept" / "report.json" : std::filesystem::path(json_path);
  write_text(path, report.dump(2) + "\n");
  std::cout << (ok ? "ALL PASS" : "FAILURES") << (opts.quick ? " (smoke)" : "") << "; report "
            << path.string() << "\n";
  return ok ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy gradient descent on zero-loss manifolds"};
  app.require_subcommand(1);
  bool serial = false;
  app.add_flag("--serial", serial, "run seed sweeps on one thread");

  ScenarioFlags sim_f, lim_f, cmp_f, reg_f, phi_f;
  auto* sim = app.add_subcommand("simulate", "noisy GD per seed; trajectory CSVs and a manifest");
  add_scenario_flags(sim, sim_f);

  auto* lim = app.add_subcommand("limit-flow", "limiting flow or SDE on the manifold from Phi(w0)");
  add_scenario_flags(lim, lim_f);

  auto* cmp = app.add_subcommand("compare", "shifted process vs limiting flow over refinement levels");
  add_scenario_flags(cmp, cmp_f);
  std::vector<std::string> levels;
  cmp->add_option("--level", levels, "alpha,sigma (repeat; default halves the plan twice)");

  auto* reg = app.add_subcommand("reg-report", "closed-form and numeric regularizer at probes");
  add_scenario_flags(reg, reg_f);
  std::vector<std::string> probes;
  reg->add_option("--probe", probes, "probe point x1,x2,... (repeat)");

  auto* phi = app.add_subcommand("verify-phi", "derivative checks of the limit map");
  add_scenario_flags(phi, phi_f);
  std::vector<std::string> points;
  PhiTolerances tol;
  phi->add_option("--point", points, "point on the manifold x1,x2,... (repeat)");
  phi->add_option("--tol-jacobian", tol.jacobian);
  phi->add_option("--tol-identity", tol.identity);
  phi->add_option("--tol-hessian", tol.hessian);

  auto* acc = app.add_subcommand("accept", "run the acceptance criteria");
  AcceptOptions aopts;
  std::vector<int> ids;
  std::string json_path;
  acc->add_flag("--quick", aopts.quick, "reduced sample counts; results marked smoke");
  acc->add_option("--seed", aopts.seed, "master seed");
  acc->add_option("--json", json_path, "report path (default $NGLAB_OUTPUT_ROOT/accept/report.json)");
  acc->add_option("ids", ids, "criterion ids (default all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sim) return run_simulate(sim_f, serial);
    if (*lim) return run_limit_flow(lim_f);
    if (*cmp) return run_compare(cmp_f, levels, serial);
    if (*reg) return run_reg_report(reg_f, probes);
    if (*phi) return run_verify_phi(phi_f, points, tol);
    if (*acc) {
      aopts.parallel = !serial;
      return run_accept(aopts, ids, json_path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitConfig;
}
