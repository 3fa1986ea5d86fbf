#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace dgpc {

void Dataset::validate() const {
  if (inputs.rows() != outputs.rows()) {
    throw std::invalid_argument("Dataset: inputs/outputs row count mismatch");
  }
  if (!inputs.allFinite() || !outputs.allFinite()) {
    throw std::invalid_argument("Dataset: non-finite entries");
  }
}

void Dataset::append(const Dataset& other) {
  if (size() == 0) {
    *this = other;
    return;
  }
  if (other.input_dim() != input_dim() || other.channels() != channels()) {
    throw std::invalid_argument("Dataset::append: dimension mismatch");
  }
  const Eigen::Index n = size(), m = other.size();
  inputs.conservativeResize(n + m, Eigen::NoChange);
  outputs.conservativeResize(n + m, Eigen::NoChange);
  inputs.bottomRows(m) = other.inputs;
  outputs.bottomRows(m) = other.outputs;
}

Dataset Dataset::subsample(Eigen::Index max_points, uint64_t seed) const {
  if (size() <= max_points) return *this;
  std::vector<Eigen::Index> idx(size());
  for (Eigen::Index i = 0; i < size(); ++i) idx[i] = i;
  Rng rng(seed);
  // Fisher-Yates prefix shuffle, then restore ordering of the kept rows.
  for (Eigen::Index i = 0; i < max_points; ++i) {
    const Eigen::Index j = rng.uniform_int(i, size() - 1);
    std::swap(idx[i], idx[j]);
  }
  std::vector<Eigen::Index> keep(idx.begin(), idx.begin() + max_points);
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.inputs.resize(max_points, input_dim());
  out.outputs.resize(max_points, channels());
  for (Eigen::Index i = 0; i < max_points; ++i) {
    out.inputs.row(i) = inputs.row(keep[i]);
    out.outputs.row(i) = outputs.row(keep[i]);
  }
  return out;
}

void Dataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Dataset::save_csv: cannot open " + path);
  for (Eigen::Index d = 0; d < input_dim(); ++d) out << "z" << d << ",";
  for (Eigen::Index c = 0; c < channels(); ++c) {
    out << "y" << c << (c + 1 < channels() ? "," : "\n");
  }
  char buf[32];
  for (Eigen::Index i = 0; i < size(); ++i) {
    for (Eigen::Index d = 0; d < input_dim(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", inputs(i, d));
      out << buf << ",";
    }
    for (Eigen::Index c = 0; c < channels(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", outputs(i, c));
      out << buf << (c + 1 < channels() ? "," : "\n");
    }
  }
}

Dataset Dataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Dataset::load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("Dataset::load_csv: empty file " + path);
  }
  Eigen::Index n_inputs = 0, n_outputs = 0;
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) {
      if (!col.empty() && col[0] == 'z') ++n_inputs;
      else if (!col.empty() && col[0] == 'y') ++n_outputs;
    }
  }
  if (n_inputs == 0 || n_outputs == 0) {
    throw std::runtime_error("Dataset::load_csv: malformed header in " + path);
  }
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    ++rows;
  }
  if (values.size() != static_cast<size_t>(rows * (n_inputs + n_outputs))) {
    throw std::runtime_error("Dataset::load_csv: ragged rows in " + path);
  }
  Dataset ds;
  ds.inputs.resize(rows, n_inputs);
  ds.outputs.resize(rows, n_outputs);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index d = 0; d < n_inputs; ++d) {
      ds.inputs(i, d) = values[i * (n_inputs + n_outputs) + d];
    }
    for (Eigen::Index c = 0; c < n_outputs; ++c) {
      ds.outputs(i, c) = values[i * (n_inputs + n_outputs) + n_inputs + c];
    }
  }
  return ds;
}

}  // namespace dgpc
