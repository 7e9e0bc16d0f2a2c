#include "platoon/types.hpp"

#include <cmath>

namespace platoon {

void RoadLimits::validate() const {
  if (!(0.0 <= v_min && v_min < v_max))
    throw std::invalid_argument("road limits: need 0 <= v_min < v_max");
  if (!(u_min < 0.0 && 0.0 < u_max))
    throw std::invalid_argument("road limits: need u_min < 0 < u_max");
  if (!(s_0 > 0.0)) throw std::invalid_argument("road limits: s_0 must be positive");
  if (!(l_c > 0.0)) throw std::invalid_argument("road limits: l_c must be positive");
  if (length && !(*length > 0.0))
    throw std::invalid_argument("road limits: roadway length must be positive");
}

double SafetyParams::rho_of(int id) const {
  if (id < 1 || static_cast<size_t>(id) > rho.size())
    throw std::invalid_argument("safety params: no headway stored for vehicle id " +
                                std::to_string(id));
  return rho[static_cast<size_t>(id - 1)];
}

void SafetyParams::validate() const {
  if (rho.empty()) throw std::invalid_argument("safety params: rho list is empty");
  for (double r : rho)
    if (!(r > 0.0)) throw std::invalid_argument("safety params: rho must be positive");
  if (!(s_0 > 0.0)) throw std::invalid_argument("safety params: s_0 must be positive");
}

void PlatoonCriteria::validate() const {
  if (!(eps_dp > 0.0 && eps_v > 0.0))
    throw std::invalid_argument("platoon criteria: tolerances must be positive");
}

double safe_gap(double v, double rho, double s0) { return rho * v + s0; }

double headway(const VehicleState& lead, const VehicleState& follow, double l_c) {
  if (lead.position < follow.position)
    throw OrderingViolation("leader at " + std::to_string(lead.position) +
                            " m is behind follower at " + std::to_string(follow.position) + " m");
  return lead.position - follow.position - l_c;
}

double approach_rate(const VehicleState& lead, const VehicleState& follow) {
  return lead.speed - follow.speed;
}

bool safety_satisfied(const VehicleState& lead, const VehicleState& follow,
                      double rho_follow, double s0, double l_c) {
  return headway(lead, follow, l_c) >= safe_gap(follow.speed, rho_follow, s0);
}

FormationResiduals formation_residuals(const std::vector<VehicleState>& states,
                                       const SafetyParams& sp, double l_c) {
  if (states.size() < 2)
    throw std::invalid_argument("formation residuals need the CAV plus at least one HDV");

  FormationResiduals out;
  double gap_sq = 0.0;
  for (size_t i = 1; i < states.size(); ++i) {
    const double dp = headway(states[i - 1], states[i], l_c);
    const int id = static_cast<int>(i) + 1;  // states[0] is the CAV (id 1)
    const double r = dp - safe_gap(states[i].speed, sp.rho_of(id), sp.s_0);
    gap_sq += r * r;
  }

  double mean = 0.0;
  for (const auto& s : states) mean += s.speed;
  mean /= static_cast<double>(states.size());
  double spd_sq = 0.0;
  for (const auto& s : states) {
    const double r = s.speed - mean;
    spd_sq += r * r;
  }

  out.gap_rss = std::sqrt(gap_sq);
  out.speed_rss = std::sqrt(spd_sq);
  return out;
}

bool platoon_formed(const std::vector<VehicleState>& states, const SafetyParams& sp,
                    const PlatoonCriteria& crit, double l_c) {
  const FormationResiduals r = formation_residuals(states, sp, l_c);
  return r.gap_rss <= crit.eps_dp && r.speed_rss <= crit.eps_v;
}

}  // namespace platoon
