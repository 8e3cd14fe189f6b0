#pragma once

#include "nglab/dynamics.hpp"
#include "nglab/io.hpp"
#include "nglab/regularizers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nglab {

// ---- ring helpers --------------------------------------------------------

namespace ring {
/// Angle atan2(w_2, w_1).
double angle(const Vec& w);
/// |a - b| folded into [0, pi].
double angular_distance(double a, double b);
Vec point(double theta);
/// Reg along the circle for anti-PGD: 1 + 0.7 sin(5 cos theta).
double anti_pgd_reg(double theta);
/// Local minimizer of the periodic `f` reached by descending from theta0 on a
/// uniform scan of n_scan points, refined by golden-section search.
double descend_minimizer(const std::function<double(double)>& f, double theta0,
                         int n_scan = 100000);
}  // namespace ring

/// Runs fn(i) for i in [0, n). With `parallel` the indices are spread over
/// OpenMP threads; results must be written to per-index slots.
void parallel_for(int n, const std::function<void(int)>& fn, bool parallel = true);

double median(std::vector<double> v);
/// (25%, 75%) quantiles by linear interpolation.
std::pair<double, double> iqr(std::vector<double> v);

// ---- scenarios -----------------------------------------------------------

struct RegionSpec {
  std::string kind = "none";  // none | annulus | ball
  double r_min = 0.0;
  double r_max = 0.0;
  [[nodiscard]] std::function<bool(const Vec&)> predicate() const;
};

/// Parsed and resolved scenario.
struct Scenario {
  Json config;
  std::string loss_id;
  std::string scheme_id;
  SmoothLoss loss;
  NoisyLoss scheme;
  NoiseFamily noise;
  ScalePlan plan;
  Vec w0;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  RegionSpec region;
  std::optional<Dataset> data;
  double sigma0 = 1.0;  // std ratio of the second-order noise block (label+minibatch)
  int grid_points = 200;
  bool arclength = false;  // ring losses get the unwrapped angle column
};

/// Builds a scenario from a JSON config. Throws ConfigError on unknown ids,
/// non-positive alpha / sigma / T, empty seeds or dimension mismatches.
Scenario build_scenario(const Json& config);

/// Names accepted in configs.
std::vector<std::string> known_losses();
std::vector<std::string> known_schemes();

/// Default Reg for a scheme on its loss (closed form when available).
RegFunctional scenario_reg(const Scenario& sc);

struct SeedOutcome {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::ok;
  long steps = 0;
  Vec final_point;
  std::string csv_file;
};

struct SimulateResult {
  std::vector<SeedOutcome> seeds;
  Json manifest;
};

/// noisy_gd per seed; writes `<dir>/traj_seed<k>.csv` and `manifest.json`
/// when `write` is set.
SimulateResult cmd_simulate(const Scenario& sc, bool write = true, bool parallel = true);

struct LimitFlowResult {
  Timescale verdict = Timescale::inconclusive;
  std::vector<Trajectory> paths;  // one for deterministic limits
  std::string notice;
};

/// Limit object per the timescale verdict, started at Phi(w0).
LimitFlowResult cmd_limit_flow(const Scenario& sc, bool write = true);

struct LevelReport {
  double alpha = 0.0;
  double sigma = 0.0;
  std::vector<double> sup_distance;       // per seed, over the grid
  std::vector<double> terminal_error;     // per seed
  std::vector<bool> exited;               // per seed
  double median_sup = 0.0;
  std::pair<double, double> iqr_sup{0.0, 0.0};
};

struct ComparisonReport {
  std::vector<double> grid;
  std::vector<LevelReport> levels;
  bool decreasing = false;
  [[nodiscard]] Json to_json() const;
};

/// Shifted process Y_n vs the deterministic constrained flow of Reg on a shared
/// grid. Distances are angular on the ring and Euclidean otherwise.
ComparisonReport cmd_compare(const Scenario& sc,
                             const std::vector<std::pair<double, double>>& levels,
                             bool parallel = true);

/// Closed-form and numeric Reg at the probes, plus the timescale verdict.
Json cmd_reg_report(const Scenario& sc, const std::vector<Vec>& probes);

/// Default probes: 8 ring points, or w* plus tangent offsets for data losses.
std::vector<Vec> default_probes(const Scenario& sc);

/// Jacobian / Laplacian / Hessian-direction checks of Phi at the given points.
Json cmd_verify_phi(const SmoothLoss& L, const std::vector<Vec>& points);

}  // namespace nglab
