#pragma once

// Closed-form pre-checks run before a simulation: bounds on the time needed
// to traverse a roadway of length L under admissible control, and whether the
// platoon can be formed within that window at all. Both are advisory gates;
// the simulator logs the report and runs regardless.

#include <optional>
#include <vector>

#include "platoon/types.hpp"

namespace platoon {

struct HorizonBounds {
  double t_lower = 0.0;              // cruise at the initial speed
  std::optional<double> t_upper;     // maximal braking; empty when the vehicle
                                     // stops short of L and never arrives
  double L_s = 0.0;                  // distance covered while braking to v_min
};

struct FeasibilityReport {
  double t_f_lower = 0.0;
  std::optional<double> t_f_upper;
  double L_s = 0.0;
  bool platoon_feasible = false;
  std::optional<double> tau_p;  // predicted duration of gap closure
  bool already_formed = false;  // initial gaps already at their references
};

// Extreme deceleration policy: full braking until the floor speed, then hold.
double piecewise_extreme_control(double v, const RoadLimits& limits);

// Traverse-time window for a CAV starting at v1_0 over a roadway of length L.
// The lower bound assumes cruising at v1_0; the upper bound follows the
// extreme braking policy. When v_min = 0 and L exceeds the braking distance
// L_s the upper bound does not exist (the vehicle stops), returned as an
// empty optional.
HorizonBounds horizon_bounds(double v1_0, const RoadLimits& limits, double L);

// Formability check. `states` is ordered [CAV, HDV-2, ..., HDV-N]. The total
// excess gap sum(dp_i - s_i) must be absorbable by the CAV braking maximally
// while HDV-N is assumed to hold its initial speed, within the traverse-time
// upper bound for roadway length L.
FeasibilityReport platoon_feasible(const std::vector<VehicleState>& states,
                                   const SafetyParams& sp, const RoadLimits& limits,
                                   double L, double l_c);

}  // namespace platoon
