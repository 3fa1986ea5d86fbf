#include "linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace dgpc {

JitteredChol::JitteredChol(const Eigen::MatrixXd& m, double jitter) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("JitteredChol: matrix must be square");
  }
  const Eigen::Index n = m.rows();
  const double mean_diag = n > 0 ? m.trace() / static_cast<double>(n) : 0.0;
  const double cap = 1e-4 * std::abs(mean_diag);

  double j = std::max(jitter, 0.0);
  while (true) {
    Eigen::MatrixXd work = m;
    if (j > 0.0) work.diagonal().array() += j;
    llt_.compute(work);
    if (llt_.info() == Eigen::Success) {
      jitter_ = j;
      return;
    }
    double next = j > 0.0 ? j * 10.0 : std::max(1e-12 * std::abs(mean_diag), 1e-300);
    if (next > cap || cap <= 0.0) {
      std::ostringstream msg;
      msg << "JitteredChol: matrix of size " << n
          << " not positive definite after jitter escalation (last jitter " << j
          << ", cap " << cap << ", mean diagonal " << mean_diag << ")";
      throw NumericalError(msg.str());
    }
    j = next;
  }
}

double JitteredChol::log_det() const {
  return 2.0 * Eigen::MatrixXd(llt_.matrixL()).diagonal().array().log().sum();
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& m, double jitter,
                           const Eigen::MatrixXd& rhs) {
  if (m.rows() != rhs.rows()) {
    throw std::invalid_argument("chol_solve: dimension mismatch between M and RHS");
  }
  return JitteredChol(m, jitter).solve(rhs);
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
  const Eigen::Index d = x.size();
  if (mean.size() != d || cov.rows() != d || cov.cols() != d) {
    throw std::invalid_argument("gaussian_log_density: dimension mismatch");
  }
  JitteredChol chol(cov, 0.0);
  const Eigen::VectorXd w = chol.whiten(x - mean);
  return -0.5 * (d * std::log(2.0 * M_PI) + chol.log_det() + w.squaredNorm());
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace dgpc
