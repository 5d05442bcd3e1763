#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cssl/causal_graph.hpp"
#include "cssl/dataset.hpp"

namespace cssl {

/// Columns to read. An empty `numeric` list means every column not named in `text`.
struct CsvSchema {
  std::vector<std::string> numeric;
  std::vector<std::string> text;
};

struct TabularSource {
  std::vector<std::string> columns;  // numeric columns, in `values` column order
  Eigen::MatrixXd values;
  std::map<std::string, std::vector<std::string>> text;
  std::string provenance;
  std::size_t dropped_rows = 0;

  [[nodiscard]] Eigen::Index column(const std::string& name) const;  // throws MissingColumn
};

/// Comma separated, header row first. Rows with a malformed numeric cell or a
/// wrong field count are dropped and counted. Throws Error{ParseError | MissingColumn}.
TabularSource load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// 1 iff value > median. Throws Error{ConstantColumn}.
Eigen::VectorXi binarize_median(const Eigen::VectorXd& values);

enum class Binarize { Median, None };

struct RealProtocol {
  std::string label;
  Binarize binarize = Binarize::None;
  std::filesystem::path graph_file;
  std::filesystem::path data_file;
  PartitionSizes sizes;
  int trials = 100;
  std::uint64_t seed = 0;
};

/// {label, binarize, graph_file, data_file, sizes:{l,u,v[,t]}, trials, seed}.
/// Relative paths resolve against the protocol file's directory.
RealProtocol protocol_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RealProtocol load_protocol(const std::filesystem::path& path);

/// Assemble graph-keyed value blocks from a source. Throws Error{MissingColumn | ParseError}.
Dataset dataset_from_source(const TabularSource& src, const CausalGraph& g, const std::string& label_column,
                            Binarize rule, const std::string& name);

/// Uniform shuffle with both classes in D_l (bounded reshuffles).
/// Throws Error{InsufficientRows | ClassCoverageFailure}.
Partitions make_trial_partitions(const Eigen::VectorXi& labels, const PartitionSizes& sizes, std::uint64_t seed,
                                 int max_retries = 1000);

/// Merge every root feature that is a cause or a spouse of the label into one
/// scenario-C entry placed at the first merged slot. No-op with fewer than two.
FactorPlan group_joint_roots(const FactorPlan& plan, const CausalGraph& g);

/// Dataset CSV with graph-ordered value columns, the label and a `partition`
/// column (l/u/v/t, empty for unassigned rows). Round-trip exact.
void write_dataset_csv(const Dataset& d, const CausalGraph& g, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, const CausalGraph& g, const std::string& name = {});

}  // namespace cssl
