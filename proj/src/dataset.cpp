#include "cssl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cssl/error.hpp"
#include "cssl/random.hpp"

namespace cssl {

const Eigen::MatrixXd& Dataset::values(const std::string& id) const {
  auto it = features.find(id);
  if (it == features.end()) throw Error(ErrorCode::UnknownNode, "dataset has no variable " + id);
  return it->second;
}

Partitions shuffle_partitions(Eigen::Index rows, const PartitionSizes& sizes, std::uint64_t seed) {
  if (sizes.total() > rows)
    throw Error(ErrorCode::InsufficientRows, "partitions need " + std::to_string(sizes.total()) + " rows, have " +
                                                 std::to_string(rows));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Partitions p;
  auto at = idx.begin();
  auto take = [&](Eigen::Index n, std::vector<Eigen::Index>& out) {
    out.assign(at, at + n);
    std::sort(out.begin(), out.end());
    at += n;
  };
  take(sizes.labelled, p.labelled);
  take(sizes.unlabelled, p.unlabelled);
  take(sizes.validation, p.validation);
  take(sizes.test, p.test);
  return p;
}

Eigen::MatrixXd gather(const Dataset& d, const std::vector<std::string>& vars, const std::vector<Eigen::Index>& idx) {
  Eigen::Index cols = 0;
  for (const auto& v : vars) cols += d.values(v).cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), cols);
  Eigen::Index at = 0;
  for (const auto& v : vars) {
    const auto& m = d.values(v);
    for (std::size_t i = 0; i < idx.size(); ++i) out.block(static_cast<Eigen::Index>(i), at, 1, m.cols()) = m.row(idx[i]);
    at += m.cols();
  }
  return out;
}

Eigen::VectorXi gather_labels(const Dataset& d, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = d.labels(idx[i]);
  return out;
}

Dataset standardize(const Dataset& d) {
  Dataset out = d;
  std::vector<Eigen::Index> fit_rows = d.partitions.labelled;
  fit_rows.insert(fit_rows.end(), d.partitions.unlabelled.begin(), d.partitions.unlabelled.end());
  if (fit_rows.size() < 2) throw Error(ErrorCode::InsufficientRows, "standardization needs at least two rows");
  const double n = static_cast<double>(fit_rows.size());
  for (auto& [id, m] : out.features) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double mean = 0.0;
      for (auto r : fit_rows) mean += m(r, c);
      mean /= n;
      double var = 0.0;
      for (auto r : fit_rows) var += (m(r, c) - mean) * (m(r, c) - mean);
      const double sd = std::sqrt(var / (n - 1.0));
      m.col(c).array() -= mean;
      if (sd > 0.0) m.col(c) /= sd;
    }
  }
  return out;
}

}  // namespace cssl
