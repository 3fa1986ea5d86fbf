// Dense linear-algebra helpers shared by the GP stack: jittered Cholesky
// solves and Gaussian log-densities.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace dgpc {

// Thrown when a factorization fails even after jitter escalation, or when a
// quantity leaves its numerically admissible range.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Cholesky factorization of a symmetric matrix M + jitter*I. The requested
// jitter is tried first; on failure it is escalated x10 up to
// 1e-4 * trace(M)/n before giving up.
class JitteredChol {
 public:
  JitteredChol(const Eigen::MatrixXd& m, double jitter);

  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return llt_.solve(rhs.derived()).eval();
  }

  // L^{-1} rhs with L the lower factor.
  template <typename Derived>
  auto whiten(const Eigen::MatrixBase<Derived>& rhs) const {
    return llt_.matrixL().solve(rhs.derived()).eval();
  }

  double log_det() const;
  double jitter() const { return jitter_; }
  Eigen::MatrixXd matrix_l() const { return llt_.matrixL(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

// (M + jitter*I)^{-1} RHS through an SPD factorization with the escalation
// policy above.
Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& m, double jitter,
                           const Eigen::MatrixXd& rhs);

// log N(x | mean, cov), cov factorized with the default jitter policy.
double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov);

inline void symmetrize(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace dgpc
