#pragma once

// Online identification of the per-HDV CTH-RV coefficients: recursive least
// squares with a forgetting factor, plus the batch weighted least-squares
// solver the tests use as an oracle.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/hdv_models.hpp"

namespace platoon {

class NumericalBreakdown : public std::runtime_error {
 public:
  explicit NumericalBreakdown(const std::string& msg) : std::runtime_error(msg) {}
};

class SingularGram : public std::runtime_error {
 public:
  explicit SingularGram(const std::string& msg) : std::runtime_error(msg) {}
};

// One identification sample: phi = [v_i(k), dp_i(k), v_lead(k)] paired with
// the speed the follower actually showed one step later.
struct Regressor {
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();
  double target = 0.0;
};

struct RlsEstimator {
  Eigen::Vector3d gamma = Eigen::Vector3d::Zero();
  Eigen::Matrix3d P = Eigen::Matrix3d::Identity();
  double xi = 1.0;  // forgetting factor in (0, 1]

  // Initial estimate and covariance used throughout the experiments:
  // gamma(0) = [0.67, 0.1, 0.18], P(0) = 0.01 * I, xi = 1.
  static RlsEstimator defaults();

  GammaVector gamma_struct() const { return {gamma(0), gamma(1), gamma(2)}; }
};

// One rank-one RLS update. Throws NumericalBreakdown if the gain denominator
// xi + phi'*P*phi is not positive (impossible while P stays SPD and xi > 0).
// P is re-symmetrized after the update to stop round-off drift.
RlsEstimator rls_update(const RlsEstimator& est, const Regressor& reg);

// Exact minimizer of the xi-weighted squared prediction error over `history`
// (most recent sample weighted 1, older samples progressively discounted).
// Throws SingularGram when the weighted Gram matrix is rank-deficient.
Eigen::Vector3d batch_ls(const std::vector<Regressor>& history, double xi);

// Same problem with a Gaussian prior (gamma0, P0): minimizes the weighted
// squared error plus xi^K * (gamma - gamma0)' * P0^-1 * (gamma - gamma0).
// Seeding with the RLS initial state makes this algebraically identical to
// running rls_update over the history, which is what the equivalence tests
// exploit.
Eigen::Vector3d batch_ls(const std::vector<Regressor>& history, double xi,
                         const Eigen::Vector3d& gamma0, const Eigen::Matrix3d& P0);

}  // namespace platoon
