#pragma once

// Car-following laws. The nonlinear optimal-velocity model is the simulator's
// ground truth for human drivers; the linear constant-time-headway +
// relative-velocity (CTH-RV) model is what the controller identifies online
// and predicts with.

#include <optional>
#include <stdexcept>
#include <string>

#include "platoon/types.hpp"

namespace platoon {

class DegenerateGamma : public std::runtime_error {
 public:
  explicit DegenerateGamma(const std::string& msg) : std::runtime_error(msg) {}
};

struct OvmParams {
  double alpha = 0.4;  // headway-error gain [1/s]
  double beta = 0.2;   // approach-rate gain [1/s]
  double v_d = 30.0;   // desired free-flow speed [m/s]
  double rho = 1.8;    // driver's own time headway [s]
  double s_0 = 3.0;    // standstill distance [m]

  void validate(const RoadLimits& limits) const;
};

struct CthRvParams {
  double eta = 0.0;  // gain on (headway - rho * v) [1/s]
  double nu = 0.0;   // gain on approach rate [1/s]
  double rho = 0.0;  // time headway [s]
};

// Discrete one-step regression coefficients of the CTH-RV model:
//   v(k+1) = g1 * v(k) + g2 * dp(k) + g3 * v_lead(k).
struct GammaVector {
  double g1 = 0.0;
  double g2 = 0.0;
  double g3 = 0.0;
};

// Optimal-velocity acceleration. `dp` empty means no predecessor (free road
// ahead); the headway term then saturates and the driver steers toward v_d.
// The returned value is the raw law; the integrator clamps it to the
// actuation limits.
double ovm_accel(std::optional<double> dp, double dv, double v, const OvmParams& p);

// One-step CTH-RV speed prediction.
double cthrv_next_speed(double v, double dp, double v_lead, const GammaVector& g);

GammaVector gamma_from_params(const CthRvParams& p, double tau);

// Inverse of gamma_from_params; throws DegenerateGamma when |g2| is too small
// for the headway to be recoverable.
CthRvParams params_from_gamma(const GammaVector& g, double tau);

// Advances one vehicle by one sampling period: p += v*tau + (tau^2/2)*u,
// v += u*tau. The input is clamped to [u_min, u_max] first; if the speed
// would leave [v_min, v_max], u is re-clamped so the update lands exactly on
// the bound, and the position update uses the re-clamped value too.
VehicleState euler_step(const VehicleState& state, double u, double tau,
                        const RoadLimits& limits);

}  // namespace platoon
