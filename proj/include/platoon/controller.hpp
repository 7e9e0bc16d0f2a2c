#pragma once

// Receding-horizon control of the CAV. Each step builds an affine prediction
// of the whole chain over the horizon as a function of the CAV input
// sequence, condenses tracking cost and safety constraints into a dense
// quadratic program with slack-softened follower-safety rows, and applies
// the first input of the minimizer.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "platoon/hdv_models.hpp"
#include "platoon/qp.hpp"
#include "platoon/types.hpp"

namespace platoon {

struct ControllerConfig {
  int horizon = 20;
  double tracking_weight = 1.0;
  double effort_weight = 1.0;
  double slack_penalty = 1e4;
  double tau = 0.1;
  // Headway enforced by the softened follower-safety rows. This is the
  // framework's advisory floor for gaps it does not directly control, set
  // below typical driver preferences for two reasons: drivers keep their
  // natural margins anyway, and the identified follower law has no standstill
  // term, so at low speeds its predicted equilibrium gap drops under any
  // steeper floor and the penalty terms would pin the group there instead of
  // letting it accelerate back to cruise. The gap the CAV itself must keep is
  // separate and hard (SafetyParams::cav_rho).
  double constraint_headway = 1.2;
  void validate() const;
};

// Everything the CAV observes at one step: the optional vehicle ahead of it,
// its own state, and the followers in front-to-back order.
struct WorldSnapshot {
  std::optional<VehicleState> pv;
  VehicleState cav;
  std::vector<VehicleState> hdvs;
  double l_c = 5.0;
};

// Scalar quantity that is affine in the CAV input sequence.
struct AffineScalar {
  Eigen::RowVectorXd wrt_u;
  double offset = 0.0;
  double eval(const Eigen::VectorXd& u) const { return wrt_u.dot(u) + offset; }
};

// Predicted positions and speeds of the CAV and every follower at steps
// 0..H, each affine in the input sequence.
struct PredictionChain {
  int horizon = 0;
  double l_c = 5.0;
  std::vector<AffineScalar> cav_p, cav_v;
  std::vector<std::vector<AffineScalar>> hdv_p, hdv_v;  // [follower][step]
};

struct PvTrajectory {
  std::vector<double> position;  // steps 0..H
  std::vector<double> speed;
};

// Hardest admissible braking of the vehicle ahead: full braking until the
// speed floor, then cruise. The safety rows against it cover every behavior
// that vehicle can actually realize.
PvTrajectory worst_case_pv_trajectory(const VehicleState& pv, double tau, int horizon,
                                      const RoadLimits& limits);

// Desired front-to-back extent of the group for the given follower speeds:
// the sum of their safe gaps.
double build_reference(const std::vector<double>& hdv_speeds, const SafetyParams& sp);

PredictionChain build_prediction_chain(const WorldSnapshot& snap,
                                       const std::vector<GammaVector>& gamma,
                                       const ControllerConfig& cfg);

// Reference extent at steps 1..H, evaluated on the chain's zero-input
// predicted follower speeds. Returned in affine form for the assembler, but
// the input sensitivity is identically zero: the target must not respond to
// the plan it is measuring.
std::vector<AffineScalar> build_reference_sequence(const PredictionChain& chain,
                                                   const SafetyParams& sp);

// Decision vector layout: H inputs, then horizon * n_followers slack
// variables (follower-major: slack for follower i, step n sits at
// H + i * H + (n - 1)).
QpProblem assemble_qp(const PredictionChain& chain, const std::optional<PvTrajectory>& pv,
                      const std::vector<AffineScalar>& reference, const ControllerConfig& cfg,
                      const SafetyParams& sp, const RoadLimits& limits);

// Braking input sequence that meets the input box and the speed floor; used
// as the feasible start and as the fallback command.
Eigen::VectorXd fail_safe_sequence(double cav_speed, const ControllerConfig& cfg,
                                   const RoadLimits& limits);

enum class ControlOutcome {
  optimal,
  degraded,  // iteration cap hit, best iterate applied
  fail_safe  // hard rows infeasible, braking applied
};

struct ControlDiagnostics {
  ControlOutcome outcome = ControlOutcome::optimal;
  int iterations = 0;
  double kkt_residual = 0.0;
  int active_slacks = 0;    // predicted follower-safety violations the solver paid for
  double solve_time_ms = 0.0;
};

// One controller evaluation: returns the acceleration command for this step.
double control_step(const WorldSnapshot& snap, const std::vector<GammaVector>& gamma,
                    const ControllerConfig& cfg, const SafetyParams& sp,
                    const RoadLimits& limits, ControlDiagnostics* diag = nullptr);

}  // namespace platoon
