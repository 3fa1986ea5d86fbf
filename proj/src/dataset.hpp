// Training data container: paired inputs Z (rows) and multi-channel outputs Y.
#pragma once

#include <Eigen/Core>
#include <string>

namespace dgpc {

struct Dataset {
  Eigen::MatrixXd inputs;   // N x D
  Eigen::MatrixXd outputs;  // N x n_channels

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index input_dim() const { return inputs.cols(); }
  Eigen::Index channels() const { return outputs.cols(); }

  void validate() const;

  // Stacks the rows of `other` after this set's rows.
  void append(const Dataset& other);

  // Uniform subsample without replacement down to max_points (no-op if
  // already small enough); ordering is preserved.
  Dataset subsample(Eigen::Index max_points, uint64_t seed) const;

  void save_csv(const std::string& path) const;
  static Dataset load_csv(const std::string& path);
};

}  // namespace dgpc
