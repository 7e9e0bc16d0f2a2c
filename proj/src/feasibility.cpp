#include "platoon/feasibility.hpp"

#include <cmath>
#include <stdexcept>

namespace platoon {

double piecewise_extreme_control(double v, const RoadLimits& limits) {
  return v > limits.v_min ? limits.u_min : 0.0;
}

HorizonBounds horizon_bounds(double v1_0, const RoadLimits& limits, double L) {
  limits.validate();
  if (!(v1_0 > 0.0)) throw std::invalid_argument("horizon_bounds: initial speed must be positive");
  if (v1_0 < limits.v_min || v1_0 > limits.v_max)
    throw std::invalid_argument("horizon_bounds: initial speed outside the speed box");
  if (!(L > 0.0)) throw std::invalid_argument("horizon_bounds: roadway length must be positive");

  HorizonBounds out;
  out.t_lower = L / v1_0;
  // distance covered while braking from v1_0 down to the floor speed
  out.L_s = (limits.v_min * limits.v_min - v1_0 * v1_0) / (2.0 * limits.u_min);

  if (L <= out.L_s) {
    // still in the braking phase when L is reached
    out.t_upper = (-v1_0 + std::sqrt(v1_0 * v1_0 + 2.0 * limits.u_min * L)) / limits.u_min;
  } else if (limits.v_min > 0.0) {
    // brake to v_min (takes t_s, covers L_s), then crawl the remainder
    const double t_s = (limits.v_min - v1_0) / limits.u_min;
    out.t_upper = t_s + (L - out.L_s) / limits.v_min;
  }
  // else: the vehicle stops after L_s < L and never arrives; no upper bound
  return out;
}

FeasibilityReport platoon_feasible(const std::vector<VehicleState>& states,
                                   const SafetyParams& sp, const RoadLimits& limits,
                                   double L, double l_c) {
  if (states.size() < 2)
    throw std::invalid_argument("platoon_feasible: need the CAV plus at least one HDV");

  const double v1 = states.front().speed;
  const double vN = states.back().speed;

  double dp_s = 0.0;
  for (size_t i = 1; i < states.size(); ++i) {
    const double dp = headway(states[i - 1], states[i], l_c);
    const int id = static_cast<int>(i) + 1;
    dp_s += dp - safe_gap(states[i].speed, sp.rho_of(id), sp.s_0);
  }
  if (dp_s < 0.0)
    throw std::invalid_argument("platoon_feasible: initial gaps are already below the safe "
                                "gaps (excess gap sum is negative)");

  const HorizonBounds bounds = horizon_bounds(v1, limits, L);
  FeasibilityReport report;
  report.t_f_lower = bounds.t_lower;
  report.t_f_upper = bounds.t_upper;
  report.L_s = bounds.L_s;

  if (dp_s == 0.0) {
    report.already_formed = true;
    report.tau_p = 0.0;
    report.platoon_feasible = true;
    return report;
  }

  // Gap closure against HDV-N cruising at vN while the CAV applies the
  // extreme policy: closure(t) = (vN - v1) t - u_min t^2 / 2 until the CAV
  // reaches v_min at t_s, linear at rate (vN - v_min) afterwards.
  const double t_s = (limits.v_min - v1) / limits.u_min;
  const double disc = (vN - v1) * (vN - v1) - 2.0 * limits.u_min * dp_s;
  if (disc < 0.0) {
    // unreachable while dp_s >= 0 and u_min < 0; kept as a defensive branch
    report.platoon_feasible = false;
    return report;
  }
  const double quad_root = ((vN - v1) - std::sqrt(disc)) / limits.u_min;

  if (quad_root <= t_s) {
    report.tau_p = quad_root;
  } else {
    const double closure_at_switch = (vN - v1) * t_s - 0.5 * limits.u_min * t_s * t_s;
    if (vN > limits.v_min) {
      report.tau_p = t_s + (dp_s - closure_at_switch) / (vN - limits.v_min);
    }
    // else the gap stops closing once the CAV holds v_min; no finite tau_p
  }

  report.platoon_feasible =
      report.tau_p.has_value() &&
      (!report.t_f_upper.has_value() || *report.tau_p <= *report.t_f_upper);
  return report;
}

}  // namespace platoon
