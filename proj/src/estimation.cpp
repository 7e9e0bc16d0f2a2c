#include "platoon/estimation.hpp"

#include <cmath>

namespace platoon {

RlsEstimator RlsEstimator::defaults() {
  RlsEstimator est;
  est.gamma << 0.67, 0.1, 0.18;
  est.P = 0.01 * Eigen::Matrix3d::Identity();
  est.xi = 1.0;
  return est;
}

RlsEstimator rls_update(const RlsEstimator& est, const Regressor& reg) {
  if (!(est.xi > 0.0 && est.xi <= 1.0))
    throw std::invalid_argument("rls_update: forgetting factor must lie in (0, 1]");
  if (!reg.phi.allFinite() || !std::isfinite(reg.target))
    throw std::invalid_argument("rls_update: regressor must be finite");

  const double denom = est.xi + reg.phi.dot(est.P * reg.phi);
  if (!(denom > 0.0))
    throw NumericalBreakdown("rls_update: gain denominator " + std::to_string(denom) +
                             " is not positive; covariance lost definiteness");

  const double innovation = reg.target - est.gamma.dot(reg.phi);
  const Eigen::Vector3d gain = est.P * reg.phi / denom;

  RlsEstimator out;
  out.xi = est.xi;
  out.gamma = est.gamma + gain * innovation;
  out.P = (est.P - (est.P * reg.phi) * (reg.phi.transpose() * est.P) / denom) / est.xi;
  out.P = ((out.P + out.P.transpose()) / 2.0).eval();
  return out;
}

namespace {

// Accumulates the xi-weighted normal equations; shared by both batch forms.
void accumulate_weighted(const std::vector<Regressor>& history, double xi,
                         Eigen::Matrix3d& gram, Eigen::Vector3d& moment) {
  // weight xi^(K-k): most recent sample k = K carries weight 1
  double w = 1.0;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    gram += w * it->phi * it->phi.transpose();
    moment += w * it->phi * it->target;
    w *= xi;
  }
}

Eigen::Vector3d solve_normal_equations(const Eigen::Matrix3d& gram,
                                       const Eigen::Vector3d& moment) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(2);
  if (!(smax > 0.0) || smin < 1e-10 * smax)
    throw SingularGram("weighted Gram matrix is rank-deficient (non-exciting data)");
  return svd.solve(moment);
}

}  // namespace

Eigen::Vector3d batch_ls(const std::vector<Regressor>& history, double xi) {
  if (!(xi > 0.0 && xi <= 1.0))
    throw std::invalid_argument("batch_ls: forgetting factor must lie in (0, 1]");
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();
  accumulate_weighted(history, xi, gram, moment);
  return solve_normal_equations(gram, moment);
}

Eigen::Vector3d batch_ls(const std::vector<Regressor>& history, double xi,
                         const Eigen::Vector3d& gamma0, const Eigen::Matrix3d& P0) {
  if (!(xi > 0.0 && xi <= 1.0))
    throw std::invalid_argument("batch_ls: forgetting factor must lie in (0, 1]");
  const double prior_weight = std::pow(xi, static_cast<double>(history.size()));
  const Eigen::Matrix3d P0_inv = P0.inverse();
  Eigen::Matrix3d gram = prior_weight * P0_inv;
  Eigen::Vector3d moment = prior_weight * P0_inv * gamma0;
  accumulate_weighted(history, xi, gram, moment);
  return solve_normal_equations(gram, moment);
}

}  // namespace platoon
