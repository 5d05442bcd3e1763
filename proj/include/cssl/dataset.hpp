#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cssl/causal_graph.hpp"

namespace cssl {

struct PartitionSizes {
  Eigen::Index labelled = 40;
  Eigen::Index unlabelled = 1000;
  Eigen::Index validation = 40;
  Eigen::Index test = 1000;  // 0 when the protocol has no test partition

  [[nodiscard]] Eigen::Index total() const { return labelled + unlabelled + validation + test; }
};

/// Row indices of each partition into the dataset's value matrices.
struct Partitions {
  std::vector<Eigen::Index> labelled;
  std::vector<Eigen::Index> unlabelled;
  std::vector<Eigen::Index> validation;
  std::vector<Eigen::Index> test;

  friend bool operator==(const Partitions&, const Partitions&) = default;
};

/// Per-variable value blocks (rows aligned) with binary labels for the label node.
struct Dataset {
  std::string name;
  std::map<std::string, Eigen::MatrixXd> features;
  Eigen::VectorXi labels;
  Partitions partitions;

  [[nodiscard]] Eigen::Index rows() const { return labels.size(); }
  [[nodiscard]] const Eigen::MatrixXd& values(const std::string& id) const;
};

/// Uniform shuffle of `rows` indices into the four partitions (each returned sorted).
Partitions shuffle_partitions(Eigen::Index rows, const PartitionSizes& sizes, std::uint64_t seed);

/// Rows `idx` of the concatenation of the named variable blocks, in the given order.
Eigen::MatrixXd gather(const Dataset& d, const std::vector<std::string>& vars, const std::vector<Eigen::Index>& idx);
Eigen::VectorXi gather_labels(const Dataset& d, const std::vector<Eigen::Index>& idx);

/// Per-column standardization (zero mean, unit variance), statistics fitted on
/// the labelled and unlabelled partitions; constant columns are only centred.
Dataset standardize(const Dataset& d);

}  // namespace cssl
