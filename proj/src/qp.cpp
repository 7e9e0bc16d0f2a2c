#include "platoon/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace platoon {

namespace {

constexpr double kFeasTol = 1e-8;

void validate_problem(const QpProblem& qp, const Eigen::VectorXd& z0) {
  const auto n = qp.P.rows();
  if (n == 0 || qp.P.cols() != n) throw std::invalid_argument("qp: P must be square and nonempty");
  if (qp.q.size() != n) throw std::invalid_argument("qp: q size mismatch");
  if (qp.C.rows() != qp.d.size()) throw std::invalid_argument("qp: C/d row mismatch");
  if (qp.C.rows() > 0 && qp.C.cols() != n) throw std::invalid_argument("qp: C column mismatch");
  if (z0.size() != n) throw std::invalid_argument("qp: z0 size mismatch");
}

}  // namespace

double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& lambda) {
  double res = (qp.P * z + qp.q - qp.C.transpose() * lambda).lpNorm<Eigen::Infinity>();
  if (qp.C.rows() > 0) {
    const Eigen::VectorXd slack = qp.C * z - qp.d;
    res = std::max(res, std::max(0.0, -slack.minCoeff()));
    res = std::max(res, std::max(0.0, -lambda.minCoeff()));
    res = std::max(res, (lambda.array() * slack.array()).abs().maxCoeff());
  }
  return res;
}

QpSolution solve_qp(const QpProblem& qp, const Eigen::VectorXd& z0, const QpOptions& opts) {
  validate_problem(qp, z0);
  const int m = static_cast<int>(qp.C.rows());

  Eigen::LLT<Eigen::MatrixXd> pfact(qp.P);
  if (pfact.info() != Eigen::Success) {
    throw std::invalid_argument("qp: Hessian is not positive definite");
  }

  QpSolution sol;
  sol.z = z0;
  sol.lambda = Eigen::VectorXd::Zero(m);

  if (m > 0) {
    const Eigen::VectorXd slack0 = qp.C * z0 - qp.d;
    if (slack0.minCoeff() < -kFeasTol) {
      sol.status = QpStatus::infeasible_start;
      sol.kkt_residual = kkt_residual(qp, sol.z, sol.lambda);
      return sol;
    }
  }

  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 200 + 4 * m;

  std::vector<int> working;                      // active row indices, insertion order
  std::vector<char> in_working(m, 0);
  std::vector<Eigen::VectorXd> pinv_rows;        // P^{-1} c_i for each working row
  Eigen::MatrixXd schur;                         // C_W P^{-1} C_W', grown/shrunk with W

  auto add_row = [&](int i) {
    Eigen::VectorXd y = pfact.solve(qp.C.row(i).transpose());
    const int k = static_cast<int>(working.size());
    Eigen::MatrixXd grown(k + 1, k + 1);
    grown.topLeftCorner(k, k) = schur;
    for (int j = 0; j < k; ++j) {
      const double v = qp.C.row(working[j]).dot(y);
      grown(k, j) = v;
      grown(j, k) = v;
    }
    grown(k, k) = qp.C.row(i).dot(y);
    schur.swap(grown);
    working.push_back(i);
    pinv_rows.push_back(std::move(y));
    in_working[i] = 1;
  };

  auto drop_row = [&](int pos) {
    const int k = static_cast<int>(working.size());
    in_working[working[pos]] = 0;
    working.erase(working.begin() + pos);
    pinv_rows.erase(pinv_rows.begin() + pos);
    Eigen::MatrixXd shrunk(k - 1, k - 1);
    for (int r = 0, rr = 0; r < k; ++r) {
      if (r == pos) continue;
      for (int c = 0, cc = 0; c < k; ++c) {
        if (c == pos) continue;
        shrunk(rr, cc) = schur(r, c);
        ++cc;
      }
      ++rr;
    }
    schur.swap(shrunk);
  };

  Eigen::VectorXd lambda_w;

  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    const Eigen::VectorXd grad = qp.P * sol.z + qp.q;
    const Eigen::VectorXd pinv_grad = pfact.solve(grad);

    // Equality-constrained subproblem on the working set via the Schur
    // complement: S lambda_w = C_W P^{-1} grad, step = sum lambda_j y_j - P^{-1} grad.
    Eigen::VectorXd step;
    const int k = static_cast<int>(working.size());
    if (k == 0) {
      lambda_w.resize(0);
      step = -pinv_grad;
    } else {
      Eigen::VectorXd rhs(k);
      for (int j = 0; j < k; ++j) rhs(j) = qp.C.row(working[j]).dot(pinv_grad);
      lambda_w = schur.ldlt().solve(rhs);
      step = -pinv_grad;
      for (int j = 0; j < k; ++j) step += lambda_w(j) * pinv_rows[j];
    }

    const double step_scale = opts.tol * (1.0 + sol.z.lpNorm<Eigen::Infinity>());
    if (step.lpNorm<Eigen::Infinity>() <= step_scale) {
      // Minimizer on the current working set. Optimal unless some multiplier
      // is negative, in which case that row leaves the set.
      int drop = -1;
      double most_negative = -opts.tol;
      for (int j = 0; j < k; ++j) {
        if (lambda_w(j) < most_negative) {
          most_negative = lambda_w(j);
          drop = j;
        }
      }
      if (drop < 0) {
        sol.lambda.setZero();
        for (int j = 0; j < k; ++j) sol.lambda(working[j]) = std::max(0.0, lambda_w(j));
        sol.status = QpStatus::optimal;
        break;
      }
      drop_row(drop);
      continue;
    }

    // Ratio test over inactive rows whose value decreases along the step.
    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      if (in_working[i]) continue;
      const double dir = qp.C.row(i).dot(step);
      if (dir >= -1e-13 * (1.0 + step.lpNorm<Eigen::Infinity>())) continue;
      const double margin = qp.C.row(i).dot(sol.z) - qp.d(i);
      const double ratio = std::max(0.0, margin) / (-dir);
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }

    sol.z += alpha * step;
    if (blocking >= 0 && alpha < 1.0) add_row(blocking);
  }

  if (sol.status != QpStatus::optimal) {
    sol.status = QpStatus::max_iterations;
    sol.lambda.setZero();
    for (std::size_t j = 0; j < working.size(); ++j) {
      sol.lambda(working[j]) = std::max(0.0, lambda_w.size() > static_cast<int>(j) ? lambda_w(j) : 0.0);
    }
  }
  sol.active = working;
  sol.kkt_residual = kkt_residual(qp, sol.z, sol.lambda);
  return sol;
}

}  // namespace platoon
