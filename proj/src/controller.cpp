#include "platoon/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace platoon {

void ControllerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("controller: horizon must be at least 1");
  if (tau <= 0.0) throw std::invalid_argument("controller: tau must be positive");
  if (tracking_weight < 0.0 || effort_weight <= 0.0) {
    throw std::invalid_argument("controller: need tracking_weight >= 0 and effort_weight > 0");
  }
  if (slack_penalty <= 0.0) throw std::invalid_argument("controller: slack_penalty must be positive");
  if (constraint_headway <= 0.0) {
    throw std::invalid_argument("controller: constraint_headway must be positive");
  }
}

PvTrajectory worst_case_pv_trajectory(const VehicleState& pv, double tau, int horizon,
                                      const RoadLimits& limits) {
  PvTrajectory out;
  out.position.reserve(horizon + 1);
  out.speed.reserve(horizon + 1);
  double p = pv.position;
  double v = pv.speed;
  out.position.push_back(p);
  out.speed.push_back(v);
  for (int n = 0; n < horizon; ++n) {
    const double u = std::max(limits.u_min, (limits.v_min - v) / tau);
    p += v * tau + 0.5 * u * tau * tau;
    v += u * tau;
    out.position.push_back(p);
    out.speed.push_back(v);
  }
  return out;
}

double build_reference(const std::vector<double>& hdv_speeds, const SafetyParams& sp) {
  double total = 0.0;
  for (std::size_t i = 0; i < hdv_speeds.size(); ++i) {
    total += safe_gap(hdv_speeds[i], sp.rho_of(static_cast<int>(i) + 2), sp.s_0);
  }
  return total;
}

PredictionChain build_prediction_chain(const WorldSnapshot& snap,
                                       const std::vector<GammaVector>& gamma,
                                       const ControllerConfig& cfg) {
  cfg.validate();
  const int h = cfg.horizon;
  const int nf = static_cast<int>(snap.hdvs.size());
  if (static_cast<int>(gamma.size()) != nf) {
    throw std::invalid_argument("controller: one gamma vector per follower required");
  }
  const double tau = cfg.tau;

  PredictionChain chain;
  chain.horizon = h;
  chain.l_c = snap.l_c;
  auto constant = [&](double value) {
    return AffineScalar{Eigen::RowVectorXd::Zero(h), value};
  };

  chain.cav_p.assign(h + 1, constant(0.0));
  chain.cav_v.assign(h + 1, constant(0.0));
  chain.cav_p[0] = constant(snap.cav.position);
  chain.cav_v[0] = constant(snap.cav.speed);
  for (int n = 0; n < h; ++n) {
    chain.cav_p[n + 1].wrt_u = chain.cav_p[n].wrt_u + tau * chain.cav_v[n].wrt_u;
    chain.cav_p[n + 1].wrt_u(n) += 0.5 * tau * tau;
    chain.cav_p[n + 1].offset = chain.cav_p[n].offset + tau * chain.cav_v[n].offset;
    chain.cav_v[n + 1].wrt_u = chain.cav_v[n].wrt_u;
    chain.cav_v[n + 1].wrt_u(n) += tau;
    chain.cav_v[n + 1].offset = chain.cav_v[n].offset;
  }

  chain.hdv_p.assign(nf, {});
  chain.hdv_v.assign(nf, {});
  for (int i = 0; i < nf; ++i) {
    chain.hdv_p[i].assign(h + 1, constant(snap.hdvs[i].position));
    chain.hdv_v[i].assign(h + 1, constant(snap.hdvs[i].speed));
  }
  for (int n = 0; n < h; ++n) {
    for (int i = 0; i < nf; ++i) {
      const AffineScalar& lead_p = (i == 0) ? chain.cav_p[n] : chain.hdv_p[i - 1][n];
      const AffineScalar& lead_v =
          (i == 0) ? chain.cav_v[n + 1] : chain.hdv_v[i - 1][n + 1];
      const GammaVector& g = gamma[i];

      AffineScalar& v_next = chain.hdv_v[i][n + 1];
      v_next.wrt_u = g.g1 * chain.hdv_v[i][n].wrt_u + g.g2 * (lead_p.wrt_u - chain.hdv_p[i][n].wrt_u) +
                     g.g3 * lead_v.wrt_u;
      v_next.offset = g.g1 * chain.hdv_v[i][n].offset +
                      g.g2 * (lead_p.offset - chain.hdv_p[i][n].offset - snap.l_c) +
                      g.g3 * lead_v.offset;

      AffineScalar& p_next = chain.hdv_p[i][n + 1];
      p_next.wrt_u = chain.hdv_p[i][n].wrt_u + tau * chain.hdv_v[i][n].wrt_u;
      p_next.offset = chain.hdv_p[i][n].offset + tau * chain.hdv_v[i][n].offset;
    }
  }
  return chain;
}

std::vector<AffineScalar> build_reference_sequence(const PredictionChain& chain,
                                                   const SafetyParams& sp) {
  // The desired platoon extent at step k+n is the sum of the followers' safe
  // gaps evaluated at their zero-input predicted speeds. Anticipating the
  // followers' surge keeps the controller from braking to close a gap they
  // are already closing themselves. The reference deliberately carries no
  // input sensitivity: the identified follower model has no speed
  // saturation, so letting the target respond to the plan lets the
  // optimizer move the goalposts instead of the vehicle.
  const int h = chain.horizon;
  const int nf = static_cast<int>(chain.hdv_v.size());
  std::vector<AffineScalar> out;
  out.reserve(static_cast<std::size_t>(h));
  for (int n = 1; n <= h; ++n) {
    AffineScalar er{Eigen::RowVectorXd::Zero(h), nf * sp.s_0};
    for (int i = 0; i < nf; ++i) {
      er.offset += sp.rho_of(i + 2) * chain.hdv_v[i][n].offset;
    }
    out.push_back(std::move(er));
  }
  return out;
}

QpProblem assemble_qp(const PredictionChain& chain, const std::optional<PvTrajectory>& pv,
                      const std::vector<AffineScalar>& reference, const ControllerConfig& cfg,
                      const SafetyParams& sp, const RoadLimits& limits) {
  const int h = chain.horizon;
  const int nf = static_cast<int>(chain.hdv_v.size());
  if (static_cast<int>(reference.size()) != h) {
    throw std::invalid_argument("controller: reference sequence length must match horizon");
  }
  const int n_slack = nf * h;
  const int nv = h + n_slack;
  const int n_rows = 4 * h + (pv ? h : 0) + 2 * n_slack;

  QpProblem qp;
  qp.P = Eigen::MatrixXd::Zero(nv, nv);
  qp.q = Eigen::VectorXd::Zero(nv);
  qp.C = Eigen::MatrixXd::Zero(n_rows, nv);
  qp.d = Eigen::VectorXd::Zero(n_rows);

  // Tracking: penalize the gap between group extent and its reference at
  // every step; extent is front bumper of the CAV to front bumper of the
  // last follower, net of vehicle lengths.
  qp.P.topLeftCorner(h, h) = cfg.effort_weight * Eigen::MatrixXd::Identity(h, h);
  if (nf > 0) {
    for (int n = 1; n <= h; ++n) {
      const Eigen::RowVectorXd a = chain.cav_p[n].wrt_u - chain.hdv_p[nf - 1][n].wrt_u -
                                   reference[n - 1].wrt_u;
      const double b = chain.cav_p[n].offset - chain.hdv_p[nf - 1][n].offset -
                       nf * chain.l_c - reference[n - 1].offset;
      qp.P.topLeftCorner(h, h) += cfg.tracking_weight * a.transpose() * a;
      qp.q.head(h) += cfg.tracking_weight * b * a.transpose();
    }
  }
  for (int j = 0; j < n_slack; ++j) qp.P(h + j, h + j) = cfg.slack_penalty;

  int row = 0;
  for (int n = 0; n < h; ++n, ++row) {  // u_n >= u_min
    qp.C(row, n) = 1.0;
    qp.d(row) = limits.u_min;
  }
  for (int n = 0; n < h; ++n, ++row) {  // u_n <= u_max
    qp.C(row, n) = -1.0;
    qp.d(row) = -limits.u_max;
  }
  for (int n = 1; n <= h; ++n, ++row) {  // CAV speed floor
    qp.C.block(row, 0, 1, h) = chain.cav_v[n].wrt_u;
    qp.d(row) = limits.v_min - chain.cav_v[n].offset;
  }
  for (int n = 1; n <= h; ++n, ++row) {  // CAV speed ceiling
    qp.C.block(row, 0, 1, h) = -chain.cav_v[n].wrt_u;
    qp.d(row) = chain.cav_v[n].offset - limits.v_max;
  }
  if (pv) {  // hard safety against the worst case of the vehicle ahead
    const double rho_cav = sp.rho_of(1);
    for (int n = 1; n <= h; ++n, ++row) {
      qp.C.block(row, 0, 1, h) = -chain.cav_p[n].wrt_u - rho_cav * chain.cav_v[n].wrt_u;
      qp.d(row) = chain.cav_p[n].offset + rho_cav * chain.cav_v[n].offset + sp.s_0 + chain.l_c -
                  pv->position[n];
    }
  }
  // Follower safety, slack-softened: headway - safe gap + slack >= 0. These
  // rows use the framework headway, not the per-driver one the reference is
  // built from; see ControllerConfig::constraint_headway. The required gap is
  // evaluated at the follower's zero-input predicted speed: the identified
  // model mirrors the leader quickly, so a plan-coupled requirement grows as
  // fast as the gap it guards and the row starts rewarding braking exactly
  // when a follower is bearing down. Only the gap side answers to the plan.
  const double rho = cfg.constraint_headway;
  for (int i = 0; i < nf; ++i) {
    for (int n = 1; n <= h; ++n, ++row) {
      const AffineScalar& lead_p = (i == 0) ? chain.cav_p[n] : chain.hdv_p[i - 1][n];
      qp.C.block(row, 0, 1, h) = lead_p.wrt_u - chain.hdv_p[i][n].wrt_u;
      qp.C(row, h + i * h + (n - 1)) = 1.0;
      qp.d(row) = -(lead_p.offset - chain.hdv_p[i][n].offset - chain.l_c -
                    rho * chain.hdv_v[i][n].offset - sp.s_0);
    }
  }
  for (int j = 0; j < n_slack; ++j, ++row) {  // slacks nonnegative
    qp.C(row, h + j) = 1.0;
    qp.d(row) = 0.0;
  }
  return qp;
}

Eigen::VectorXd fail_safe_sequence(double cav_speed, const ControllerConfig& cfg,
                                   const RoadLimits& limits) {
  Eigen::VectorXd u(cfg.horizon);
  double v = cav_speed;
  for (int n = 0; n < cfg.horizon; ++n) {
    u(n) = std::max(limits.u_min, (limits.v_min - v) / cfg.tau);
    v += u(n) * cfg.tau;
  }
  return u;
}

double control_step(const WorldSnapshot& snap, const std::vector<GammaVector>& gamma,
                    const ControllerConfig& cfg, const SafetyParams& sp,
                    const RoadLimits& limits, ControlDiagnostics* diag) {
  const auto t0 = std::chrono::steady_clock::now();
  ControlDiagnostics local;

  const PredictionChain chain = build_prediction_chain(snap, gamma, cfg);
  std::optional<PvTrajectory> pv;
  if (snap.pv) pv = worst_case_pv_trajectory(*snap.pv, cfg.tau, cfg.horizon, limits);
  const std::vector<AffineScalar> reference = build_reference_sequence(chain, sp);
  const QpProblem qp = assemble_qp(chain, pv, reference, cfg, sp, limits);

  const int h = cfg.horizon;
  const int n_slack = static_cast<int>(qp.P.rows()) - h;
  const Eigen::VectorXd u_fs = fail_safe_sequence(snap.cav.speed, cfg, limits);

  // The braking sequence minimizes every hard row's left side over the input
  // box (it yields the pointwise-lowest speed and position profile), so the
  // hard rows admit any input iff they admit this one.
  const int n_hard = 4 * h + (pv ? h : 0);
  Eigen::VectorXd z0(qp.P.rows());
  z0.head(h) = u_fs;
  z0.tail(n_slack).setZero();
  bool hard_feasible = true;
  for (int r = 0; r < n_hard; ++r) {
    if (qp.C.row(r).head(h).dot(u_fs) < qp.d(r) - 1e-8) {
      hard_feasible = false;
      break;
    }
  }

  double command;
  if (!hard_feasible) {
    local.outcome = ControlOutcome::fail_safe;
    command = u_fs(0);
  } else {
    // Follower-safety rows line up with the slack variables one-to-one, so
    // initializing each slack to the row's shortfall makes z0 feasible.
    for (int r = n_hard; r < n_hard + n_slack; ++r) {
      const double gap = qp.d(r) - qp.C.row(r).head(h).dot(u_fs);
      if (gap > 0.0) z0(h + (r - n_hard)) = gap;
    }
    QpSolution sol = solve_qp(qp, z0);
    local.iterations = sol.iterations;
    local.kkt_residual = sol.kkt_residual;
    for (int j = 0; j < n_slack; ++j) {
      if (sol.z(h + j) > 1e-8) ++local.active_slacks;
    }
    switch (sol.status) {
      case QpStatus::optimal:
        local.outcome = ControlOutcome::optimal;
        command = std::clamp(sol.z(0), limits.u_min, limits.u_max);
        break;
      case QpStatus::max_iterations:
        local.outcome = ControlOutcome::degraded;
        command = std::clamp(sol.z(0), limits.u_min, limits.u_max);
        break;
      default:
        local.outcome = ControlOutcome::fail_safe;
        command = u_fs(0);
        break;
    }
  }

  local.solve_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (diag) *diag = local;
  return command;
}

}  // namespace platoon
