#include "nglab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nglab {

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::diverged: return "diverged";
    case RunStatus::exited: return "exited";
  }
  return "?";
}

std::string to_string(Regime r) {
  return r == Regime::nondegenerate ? "nondegenerate" : "degenerate";
}

std::vector<double> unwrapped_angles(const std::vector<Vec>& pts) {
  std::vector<double> out;
  out.reserve(pts.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double a = std::atan2(pts[i](1), pts[i](0));
    if (i > 0) {
      while (a - prev > std::numbers::pi) a -= 2.0 * std::numbers::pi;
      while (a - prev < -std::numbers::pi) a += 2.0 * std::numbers::pi;
    }
    out.push_back(a);
    prev = a;
  }
  return out;
}

void annotate(Trajectory& traj, const SmoothLoss& L, const DiagnosticOptions& opts) {
  const std::size_t n = traj.points.size();
  traj.loss.resize(n);
  traj.grad_norm.resize(n);
  traj.dist_gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& w = traj.points[i];
    traj.loss[i] = L.value(w);
    traj.grad_norm[i] = L.gradient(w).norm();
    traj.dist_gamma[i] = opts.dist_gamma ? opts.dist_gamma(w) : distance_to_gamma_estimate(L, w);
  }
  if (opts.arclength) {
    if (L.dim != 2) throw ConfigError("arclength coordinate needs a 2-d parameter");
    traj.arclength = unwrapped_angles(traj.points);
  } else {
    traj.arclength.clear();
  }
}

Trajectory noisy_gd(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w0,
                    double alpha, long n_steps, Rng& rng, const GdOptions& opts) {
  if (family.dim != Lhat.noise_dim) throw ConfigError("noisy_gd: noise dim does not match scheme");
  if (w0.size() != Lhat.base.dim) throw ConfigError("noisy_gd: w0 has wrong dimension");
  if (alpha < 0.0 || n_steps < 0) throw ConfigError("noisy_gd: alpha and n_steps must be >= 0");
  const long stride = opts.stride > 0 ? opts.stride : std::max<long>(1, n_steps / 10000);
  const bool explicit_steps = !opts.record_at.empty();
  std::size_t next = 0;
  auto want = [&](long k) {
    if (explicit_steps) {
      while (next < opts.record_at.size() && opts.record_at[next] < k) ++next;
      return next < opts.record_at.size() && opts.record_at[next] == k;
    }
    return k % stride == 0 || k == n_steps;
  };

  Trajectory tr;
  Vec w = w0;
  Vec eta(family.dim);
  if (want(0)) tr.push(0.0, w, 0);
  for (long k = 1; k <= n_steps; ++k) {
    sample_into(family, rng, eta.data());
    w -= alpha * Lhat.grad_w(w, eta);
    const bool blown = !w.allFinite() || w.norm() > opts.blowup_radius;
    const bool left = !blown && opts.region && !opts.region(w);
    if (blown || left) {
      tr.status = blown ? RunStatus::diverged : RunStatus::exited;
      tr.last_step = k;
      if (!blown) tr.push(static_cast<double>(k), w, k);
      return tr;
    }
    if (want(k)) tr.push(static_cast<double>(k), w, k);
  }
  tr.last_step = n_steps;
  return tr;
}

Vec noisy_gd_final(const NoisyLoss& Lhat, const NoiseFamily& family, const Vec& w0,
                   double alpha, long n_steps, Rng& rng, RunStatus* status) {
  GdOptions o;
  o.record_at = {n_steps};
  Trajectory tr = noisy_gd(Lhat, family, w0, alpha, n_steps, rng, o);
  if (status) *status = tr.status;
  if (tr.points.empty()) return Vec::Constant(w0.size(), std::numeric_limits<double>::quiet_NaN());
  return tr.points.back();
}

Trajectory gradient_flow(const SmoothLoss& L, const Vec& x0, double t_end, int n_records,
                         const OdeOptions& opts) {
  if (n_records < 2) n_records = 2;
  const std::vector<double> grid = uniform_grid(t_end, n_records);
  const std::vector<Vec> xs =
      flow_at_times([&L](const Vec& x) { return Vec(-L.gradient(x)); }, x0, grid, opts);
  Trajectory tr;
  for (std::size_t i = 0; i < grid.size(); ++i) tr.push(grid[i], xs[i]);
  return tr;
}

double ScalePlan::clock_unit() const {
  return regime == Regime::nondegenerate ? alpha * sigma * sigma
                                         : alpha * alpha * sigma * sigma;
}

long ScalePlan::step_index(double t) const {
  const double x = t / clock_unit();
  return static_cast<long>(std::floor(x + 1e-9 * std::max(1.0, x)));
}

double ScalePlan::integrator(double t) const { return alpha * static_cast<double>(step_index(t)); }

void ScalePlan::validate() const {
  if (!(alpha > 0.0) || !(sigma > 0.0) || !(horizon > 0.0))
    throw ConfigError("scale plan: alpha, sigma and T must be > 0");
}

long ScalePlan::n_steps() const {
  validate();
  const double n = std::ceil(horizon / clock_unit() - 1e-9);
  if (n > step_cap) throw BudgetError("scale plan needs " + std::to_string(n) + " iterations");
  return static_cast<long>(n);
}

std::vector<double> uniform_grid(double T, int n) {
  if (n < 2) throw ConfigError("grid needs at least 2 points");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = T * i / (n - 1);
  return g;
}

std::vector<long> record_steps(const ScalePlan& plan, const std::vector<double>& grid) {
  std::vector<long> s;
  s.reserve(grid.size());
  for (double t : grid) s.push_back(plan.step_index(t));
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

Trajectory rescaled_process(const Trajectory& traj, const ScalePlan& plan,
                            const std::vector<double>& grid) {
  Trajectory out;
  for (double t : grid) {
    const long k = plan.step_index(t);
    if (k > traj.last_step) throw ConfigError("rescaled_process: horizon exceeds the run");
    const auto it = std::lower_bound(traj.steps.begin(), traj.steps.end(), k);
    if (it == traj.steps.end() || *it != k)
      throw ConfigError("rescaled_process: iterate " + std::to_string(k) + " was not recorded");
    out.push(t, traj.points[static_cast<std::size_t>(it - traj.steps.begin())], k);
  }
  out.last_step = traj.last_step;
  out.status = traj.status;
  return out;
}

Trajectory shifted_process(const SmoothLoss& L, const Trajectory& rescaled,
                           const ScalePlan& plan, const PhiOptions& phi_opts) {
  if (rescaled.points.empty()) throw ConfigError("shifted_process: empty trajectory");
  const Vec& w0 = rescaled.points.front();
  const Vec phi0 = limit_map_phi(L, w0, phi_opts);
  std::vector<double> a;
  a.reserve(rescaled.times.size());
  for (double t : rescaled.times) a.push_back(plan.integrator(t));
  const std::vector<Vec> flow =
      flow_at_times([&L](const Vec& x) { return Vec(-L.gradient(x)); }, w0, a, phi_opts.ode);
  Trajectory out;
  for (std::size_t i = 0; i < rescaled.size(); ++i)
    out.push(rescaled.times[i], Vec(rescaled.points[i] - flow[i] + phi0), rescaled.steps[i]);
  out.status = rescaled.status;
  out.last_step = rescaled.last_step;
  return out;
}

namespace {

std::vector<long> record_plan(long n_steps, int n_records) {
  std::vector<long> r;
  const int n = std::max(2, n_records);
  for (int i = 0; i < n; ++i) r.push_back(n_steps * i / (n - 1));
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

void check_on_manifold(const SmoothLoss& L, const Vec& y0, double tol) {
  const double g = L.gradient(y0).norm();
  if (!(g < tol)) throw OffManifoldError("start point is not on the manifold: |grad L| = " +
                                         std::to_string(g));
}

}  // namespace

Trajectory constrained_gradient_flow(const SmoothLoss& L,
                                     const std::function<Vec(const Vec&)>& reg_grad,
                                     const Vec& y0, double t_end,
                                     const ConstrainedOptions& opts) {
  check_on_manifold(L, y0, opts.on_manifold_tol);
  const long n = std::max<long>(1, static_cast<long>(std::ceil(t_end / opts.dt - 1e-9)));
  const double dt = t_end / n;
  const std::vector<long> rec = record_plan(n, opts.n_records);
  std::size_t ri = 0;

  // One Euler step of size h with retraction; on failure split into halves.
  std::function<Vec(const Vec&, double, int)> step = [&](const Vec& y, double h, int depth) -> Vec {
    const ProjectorPair pp = projectors(spectral_split(L.hessian(y), opts.delta));
    const Vec trial = y - h * (pp.P * reg_grad(y));
    try {
      return limit_map_phi(L, trial, opts.retraction);
    } catch (const NotAttractedError&) {
      if (depth >= opts.max_halvings) throw OffManifoldError("constrained flow: retraction failed");
      return step(step(y, 0.5 * h, depth + 1), 0.5 * h, depth + 1);
    }
  };

  Trajectory tr;
  Vec y = y0;
  for (long k = 0; k <= n; ++k) {
    if (ri < rec.size() && rec[ri] == k) {
      tr.push(k * dt, y, k);
      ++ri;
    }
    if (k == n) break;
    y = step(y, dt, 0);
  }
  tr.last_step = n;
  return tr;
}

Trajectory constrained_sde(const SmoothLoss& L, const DegenerateParts& parts, double sigma0,
                           const Vec& y0, double t_end, Rng& rng,
                           const ConstrainedOptions& opts, const IncrementSource& increments) {
  if (!parts.f || !parts.f_jac) throw SchemeError("constrained_sde: degenerate parts missing");
  check_on_manifold(L, y0, opts.on_manifold_tol);
  const long n = std::max<long>(1, static_cast<long>(std::ceil(t_end / opts.dt - 1e-9)));
  const double dt = t_end / n;
  const double sq = std::sqrt(dt);
  const std::vector<long> rec = record_plan(n, opts.n_records);
  std::size_t ri = 0;

  Trajectory tr;
  Vec y = y0;
  for (long k = 0; k <= n; ++k) {
    if (ri < rec.size() && rec[ri] == k) {
      tr.push(k * dt, y, k);
      ++ri;
    }
    if (k == n) break;
    const SpectralSplit split = spectral_split(L.hessian(y), opts.delta);
    const ProjectorPair pp = projectors(split);
    const Mat J = parts.f_jac(y).transpose();
    const int d = static_cast<int>(J.cols());
    Vec noise = J * (increments ? increments(k, d, dt) : Vec(sq * rng.normal_vec(d)));
    Mat Sigma = J * J.transpose();
    if (parts.H_grads) {
      for (const auto& e : parts.H_grads(y)) {
        noise += sigma0 * e.grad * (sq * rng.normal());
        Sigma += sigma0 * sigma0 * e.grad * e.grad.transpose();
      }
    }
    const Vec drift = 0.5 * phi_second_derivative(split, third_derivative(L, y), Sigma);
    const Vec trial = y + pp.P * noise + dt * drift;
    try {
      y = limit_map_phi(L, trial, opts.retraction);
    } catch (const NotAttractedError&) {
      throw OffManifoldError("constrained SDE: retraction failed at step " + std::to_string(k));
    }
  }
  tr.last_step = n;
  return tr;
}

}  // namespace nglab
