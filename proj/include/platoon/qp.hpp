#pragma once

// Dense strictly convex quadratic programming:
//
//   minimize    z' P z / 2 + q' z
//   subject to  C z >= d        (row-wise)
//
// Solved with a primal active-set method. P must be positive definite; the
// caller supplies a feasible starting point (both users of this solver can
// construct one directly, so no phase-1 is provided).

#include <Eigen/Dense>
#include <vector>

namespace platoon {

struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
};

enum class QpStatus {
  optimal,
  max_iterations,   // best iterate returned, flagged degraded
  infeasible_start  // z0 violates C z >= d; nothing solved
};

struct QpSolution {
  QpStatus status = QpStatus::optimal;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;   // one multiplier per constraint row (zero off the active set)
  int iterations = 0;
  double kkt_residual = 0.0;
  std::vector<int> active;  // final working set, row indices into C
};

struct QpOptions {
  int max_iterations = 0;  // 0: derived from the constraint count
  double tol = 1e-9;
};

QpSolution solve_qp(const QpProblem& qp, const Eigen::VectorXd& z0, const QpOptions& opts = {});

// Optimality certificate: max over stationarity |P z + q - C' lambda|,
// primal violation max(0, d - C z), dual violation max(0, -lambda), and
// complementarity |lambda .* (C z - d)|. For a strictly convex program a
// small residual is sufficient, not just necessary, for optimality.
double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& lambda);

}  // namespace platoon
