#pragma once

#include "nglab/types.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace nglab {

using VectorField = std::function<Vec(const Vec&)>;

struct OdeOptions {
  double tol = 1e-10;  // per-step error, scaled by max(1, |x|_inf)
  double dt_init = 1e-2;
  double dt_min = 1e-14;
  double dt_max = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
};

/// Classic RK4 step.
Vec rk4_step(const VectorField& f, const Vec& x, double dt);

/// Adaptive RK4 with step doubling and local Richardson extrapolation, for
/// autonomous systems dx/dt = f(x). Keeps its step size between calls.
class AdaptiveRk4 {
 public:
  AdaptiveRk4(VectorField f, OdeOptions opts = {});

  /// Integrates from (x, t) to t_end in place. If `stop` is set and returns
  /// true after an accepted step, integration halts early and t holds the
  /// stop time. Returns the number of accepted steps.
  long advance(Vec& x, double& t, double t_end,
               const std::function<bool(double, const Vec&)>& stop = {});

  [[nodiscard]] double dt() const { return dt_; }

 private:
  VectorField f_;
  OdeOptions opts_;
  double dt_;
};

/// Fixed-step RK4 from 0 to t_end.
Vec rk4_fixed(const VectorField& f, Vec x, double t_end, double dt);

/// Values of the flow at the sorted `times` (all >= 0).
std::vector<Vec> flow_at_times(const VectorField& f, const Vec& x0,
                               const std::vector<double>& times, OdeOptions opts = {});

}  // namespace nglab
