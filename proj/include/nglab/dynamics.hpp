#pragma once

#include "nglab/manifold.hpp"
#include "nglab/noise.hpp"
#include "nglab/regularizers.hpp"
#include "nglab/schemes.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nglab {

enum class RunStatus { ok, diverged, exited };
std::string to_string(RunStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> points;
  std::vector<long> steps;  // discrete iteration index when meaningful
  // Diagnostics, filled by annotate().
  std::vector<double> loss;
  std::vector<double> grad_norm;
  std::vector<double> dist_gamma;
  std::vector<double> arclength;  // empty unless requested
  RunStatus status = RunStatus::ok;
  long last_step = 0;  // iterations actually performed

  [[nodiscard]] std::size_t size() const { return points.size(); }
  void push(double t, const Vec& w, long step = 0) {
    times.push_back(t);
    points.push_back(w);
    steps.push_back(step);
  }
};

struct DiagnosticOptions {
  // Empty: |grad L| / smallest positive eigenvalue.
  std::function<double(const Vec&)> dist_gamma;
  bool arclength = false;  // unwrapped atan2(w_2, w_1) for the circle
};

/// Fills loss / grad_norm / dist_gamma (and arclength) for every point.
void annotate(Trajectory& traj, const SmoothLoss& L, const DiagnosticOptions& opts = {});

/// Unwrapped angle sequence of 2-d points.
std::vector<double> unwrapped_angles(const std::vector<Vec>& pts);

struct GdOptions {
  long stride = 0;                 // 0: max(1, n_steps / 1e4)
  std::vector<long> record_at;     // if set, record exactly these steps (sorted)
  double blowup_radius = 1e6;
  std::function<bool(const Vec&)> region;  // stop when it returns false
};

/// w_{k+1} = w_k - alpha grad_w L^(w_k, eta_k), eta_k fresh from `family`.
/// Times in the result are iteration indices.
Trajectory noisy_gd(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w0,
                    double alpha, long n_steps, Rng& rng, const GdOptions& opts = {});

/// Final iterate only (no recording).
Vec noisy_gd_final(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w0,
                   double alpha, long n_steps, Rng& rng, RunStatus* status = nullptr);

/// Adaptive RK4 of dx/dt = -grad L, recorded at `n_records` uniform times.
Trajectory gradient_flow(const SmoothLoss& L, const Vec& x0, double t_end, int n_records = 100,
                         const OdeOptions& opts = {});

enum class Regime { nondegenerate, degenerate };
std::string to_string(Regime r);

struct ScalePlan {
  double alpha = 0.1;
  double sigma = 0.1;
  Regime regime = Regime::nondegenerate;
  double horizon = 1.0;
  double step_cap = 1e9;

  /// Slow-clock duration of one iteration: alpha sigma^2 or alpha^2 sigma^2.
  [[nodiscard]] double clock_unit() const;
  /// floor(t / unit), guarded against rounding of exact multiples.
  [[nodiscard]] long step_index(double t) const;
  /// A_n(t) = alpha * step_index(t).
  [[nodiscard]] double integrator(double t) const;
  /// Iterations covering [0, horizon]; throws BudgetError above step_cap.
  [[nodiscard]] long n_steps() const;
  /// Throws ConfigError on non-positive alpha, sigma or horizon.
  void validate() const;
};

/// Uniform grid of n points on [0, T] (n >= 2).
std::vector<double> uniform_grid(double T, int n);
/// Iteration indices needed to evaluate the rescaled process on `grid`.
std::vector<long> record_steps(const ScalePlan& plan, const std::vector<double>& grid);

/// W_n(t) = w_{step_index(t)} on `grid`. Throws ConfigError when a needed
/// step was not recorded or lies beyond the run.
Trajectory rescaled_process(const Trajectory& traj, const ScalePlan& plan,
                            const std::vector<double>& grid);

/// Y_n(t) = W_n(t) - phi(W_n(0), A_n(t)) + Phi(W_n(0)).
Trajectory shifted_process(const SmoothLoss& L, const Trajectory& rescaled,
                           const ScalePlan& plan, const PhiOptions& phi_opts = {});

struct ConstrainedOptions {
  double dt = 1e-3;
  double delta = 0.0;
  int n_records = 200;
  int max_halvings = 8;
  double on_manifold_tol = 1e-6;  // |grad L| allowed at y0
  PhiOptions retraction{};
};

/// dY/dt = -P grad Reg(Y) by explicit Euler with retraction onto Gamma.
Trajectory constrained_gradient_flow(const SmoothLoss& L,
                                     const std::function<Vec(const Vec&)>& reg_grad,
                                     const Vec& y0, double t_end,
                                     const ConstrainedOptions& opts = {});

/// Supplies the Brownian increment db (length d) for SDE step `step`; used to
/// couple the SDE to a discrete run. Empty: N(0, dt I) from the rng.
using IncrementSource = std::function<Vec(long step, int d, double dt)>;

/// Euler-Maruyama for dY = P(grad f db + sigma0 grad H : dB) + 1/2 d^2Phi[Sigma] dt,
/// then retraction onto Gamma.
Trajectory constrained_sde(const SmoothLoss& L, const DegenerateParts& parts, double sigma0,
                           const Vec& y0, double t_end, Rng& rng,
                           const ConstrainedOptions& opts = {},
                           const IncrementSource& increments = {});

}  // namespace nglab
