#include "nglab/ode.hpp"

#include <algorithm>
#include <cmath>

namespace nglab {

Vec rk4_step(const VectorField& f, const Vec& x, double dt) {
  const Vec k1 = f(x);
  const Vec k2 = f(x + 0.5 * dt * k1);
  const Vec k3 = f(x + 0.5 * dt * k2);
  const Vec k4 = f(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

AdaptiveRk4::AdaptiveRk4(VectorField f, OdeOptions opts)
    : f_(std::move(f)), opts_(opts), dt_(opts.dt_init) {}

long AdaptiveRk4::advance(Vec& x, double& t, double t_end,
                          const std::function<bool(double, const Vec&)>& stop) {
  long accepted = 0;
  long attempts = 0;
  while (t < t_end) {
    if (++attempts > opts_.max_steps) throw StiffnessError("adaptive RK4: step budget exhausted");
    double h = std::min({dt_, opts_.dt_max, t_end - t});
    const bool clipped = h < dt_;
    const Vec big = rk4_step(f_, x, h);
    const Vec half = rk4_step(f_, x, 0.5 * h);
    const Vec fine = rk4_step(f_, half, 0.5 * h);
    if (!big.allFinite() || !fine.allFinite()) {
      dt_ = 0.25 * h;
      if (dt_ < opts_.dt_min) throw StiffnessError("adaptive RK4: non-finite state");
      continue;
    }
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    const double err = (fine - big).cwiseAbs().maxCoeff() / 15.0 / scale;
    if (err <= opts_.tol) {
      x = fine + (fine - big) / 15.0;
      t = (h == t_end - t) ? t_end : t + h;
      ++accepted;
      const double grow = err == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(opts_.tol / err, 0.2), 0.2, 4.0);
      // a step shortened to hit t_end says nothing about the natural size
      if (!clipped) dt_ = h * grow;
      if (stop && stop(t, x)) return accepted;
    } else {
      dt_ = h * std::clamp(0.9 * std::pow(opts_.tol / err, 0.2), 0.1, 0.9);
      if (dt_ < opts_.dt_min) throw StiffnessError("adaptive RK4: step size underflow");
    }
  }
  return accepted;
}

Vec rk4_fixed(const VectorField& f, Vec x, double t_end, double dt) {
  const long n = static_cast<long>(std::ceil(t_end / dt - 1e-12));
  const double h = n > 0 ? t_end / n : 0.0;
  for (long k = 0; k < n; ++k) x = rk4_step(f, x, h);
  return x;
}

std::vector<Vec> flow_at_times(const VectorField& f, const Vec& x0,
                               const std::vector<double>& times, OdeOptions opts) {
  AdaptiveRk4 rk(f, opts);
  std::vector<Vec> out;
  out.reserve(times.size());
  Vec x = x0;
  double t = 0.0;
  for (double target : times) {
    if (target < t) throw ConfigError("flow_at_times: times must be sorted and >= 0");
    rk.advance(x, t, target);
    out.push_back(x);
  }
  return out;
}

}  // namespace nglab
