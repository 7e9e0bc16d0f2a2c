#include "platoon/hdv_models.hpp"

#include <algorithm>
#include <cmath>

namespace platoon {

void OvmParams::validate(const RoadLimits& limits) const {
  if (!(alpha > 0.0 && beta > 0.0))
    throw std::invalid_argument("ovm params: gains must be positive");
  // Drivers may prefer more speed than the road allows; the integrator caps
  // realized speeds at the limits, so only the floor makes a draw unusable.
  if (!(v_d > limits.v_min))
    throw std::invalid_argument("ovm params: desired speed must exceed v_min");
  if (!(rho > 0.0)) throw std::invalid_argument("ovm params: rho must be positive");
  if (!(s_0 > 0.0)) throw std::invalid_argument("ovm params: s_0 must be positive");
}

double ovm_accel(std::optional<double> dp, double dv, double v, const OvmParams& p) {
  const double s = p.rho * v + p.s_0;
  // With no car ahead the headway term saturates: tanh(delta) -> 1.
  const double tanh_delta = dp ? std::tanh(*dp - s) : 1.0;
  const double v_des = 0.5 * p.v_d * (tanh_delta + std::tanh(s));
  const double relax = dp ? p.beta * dv : 0.0;
  return p.alpha * (v_des - v) + relax;
}

double cthrv_next_speed(double v, double dp, double v_lead, const GammaVector& g) {
  return g.g1 * v + g.g2 * dp + g.g3 * v_lead;
}

GammaVector gamma_from_params(const CthRvParams& p, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("gamma_from_params: tau must be positive");
  return {1.0 - (p.eta * p.rho + p.nu) * tau, p.eta * tau, p.nu * tau};
}

CthRvParams params_from_gamma(const GammaVector& g, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("params_from_gamma: tau must be positive");
  if (std::abs(g.g2) < 1e-8)
    throw DegenerateGamma("g2 = " + std::to_string(g.g2) +
                          " is too small to recover a time headway");
  return {g.g2 / tau, g.g3 / tau, (1.0 - g.g1 - g.g3) / g.g2};
}

VehicleState euler_step(const VehicleState& state, double u, double tau,
                        const RoadLimits& limits) {
  double uc = std::clamp(u, limits.u_min, limits.u_max);
  const double v_next = state.speed + uc * tau;
  if (v_next > limits.v_max) {
    uc = (limits.v_max - state.speed) / tau;
  } else if (v_next < limits.v_min) {
    uc = (limits.v_min - state.speed) / tau;
  }
  VehicleState out;
  out.position = state.position + state.speed * tau + 0.5 * tau * tau * uc;
  // The limiter above lands on the bound only up to roundoff; snap exactly.
  out.speed = std::clamp(state.speed + uc * tau, limits.v_min, limits.v_max);
  out.accel = uc;
  return out;
}

}  // namespace platoon
