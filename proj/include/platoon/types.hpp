#pragma once

// Shared physical types and gap/headway kinematics for the platoon simulator.
// Conventions: vehicle id 0 is the (optional) preceding vehicle, id 1 the
// controlled CAV, ids 2..N the human-driven followers ordered front to back.
// All quantities are SI (m, m/s, m/s^2, s).

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace platoon {

// Thrown when a supposed leader sits behind its follower: either the caller
// indexed the vehicle set wrong or a collision already happened upstream.
class OrderingViolation : public std::runtime_error {
 public:
  explicit OrderingViolation(const std::string& msg) : std::runtime_error(msg) {}
};

struct VehicleState {
  double position = 0.0;  // front bumper [m]
  double speed = 0.0;     // [m/s]
  double accel = 0.0;     // input applied over the current step [m/s^2]
};

struct RoadLimits {
  double v_min = 0.0;
  double v_max = 35.0;
  double u_min = -5.0;
  double u_max = 3.0;
  std::optional<double> length;  // roadway length available for formation [m]
  double l_c = 5.0;              // vehicle length [m]
  double s_0 = 3.0;              // standstill distance [m]

  // Throws std::invalid_argument on a malformed configuration.
  void validate() const;
};

// Safe time headway per vehicle plus the shared standstill distance. rho is
// indexed by vehicle id minus one (rho[0] belongs to the CAV, rho[i-1] to
// vehicle i), covering ids 1..N.
struct SafetyParams {
  std::vector<double> rho;
  double s_0 = 3.0;

  double rho_of(int id) const;
  void validate() const;
};

struct PlatoonCriteria {
  double eps_dp = 1.0;  // gap residual tolerance [m]
  double eps_v = 0.5;   // speed residual tolerance [m/s]

  void validate() const;
};

// Minimum lawful bumper-to-bumper gap at speed v.
double safe_gap(double v, double rho, double s0);

// Bumper-to-bumper spacing; throws OrderingViolation if the leader is behind
// the follower. A small negative return (overlap shorter than one car length)
// is a collision, which callers detect separately.
double headway(const VehicleState& lead, const VehicleState& follow, double l_c);

double approach_rate(const VehicleState& lead, const VehicleState& follow);

// Rear-end collision avoidance check for one consecutive pair: headway at
// least rho_follow * v_follow + s0.
bool safety_satisfied(const VehicleState& lead, const VehicleState& follow,
                      double rho_follow, double s0, double l_c);

// Platoon-formation test over the controlled group. `states` is ordered
// [CAV, HDV-2, ..., HDV-N]. Two root-sum-square residuals are checked: gap
// deviations of the HDVs from their safe gaps, and speed deviations of all
// vehicles from the group mean.
bool platoon_formed(const std::vector<VehicleState>& states, const SafetyParams& sp,
                    const PlatoonCriteria& crit, double l_c);

// The two residuals behind platoon_formed, exposed so the simulator can log
// them per step and re-threshold without replaying states.
struct FormationResiduals {
  double gap_rss = 0.0;
  double speed_rss = 0.0;
};
FormationResiduals formation_residuals(const std::vector<VehicleState>& states,
                                       const SafetyParams& sp, double l_c);

}  // namespace platoon
