#include "cssl/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cssl/error.hpp"
#include "cssl/log.hpp"
#include "cssl/random.hpp"

namespace cssl {

namespace fs = std::filesystem;
using Eigen::Index;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::string> value_columns(const CausalGraph& g) {
  std::vector<std::string> out;
  for (const auto& id : topological_order(g)) {
    if (id == g.label()) continue;
    for (auto& c : g.node(id).column_names()) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

Index TabularSource::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorCode::MissingColumn, "no column " + name);
  return static_cast<Index>(it - columns.begin());
}

TabularSource load_csv(const fs::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw Error(ErrorCode::ParseError, "missing header in " + path.string());
  std::vector<std::string> header;
  for (auto f : split(line)) header.emplace_back(f);
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < header.size(); ++i) where.emplace(header[i], i);

  auto locate = [&](const std::string& name) {
    auto it = where.find(name);
    if (it == where.end()) throw Error(ErrorCode::MissingColumn, path.string() + " has no column " + name);
    return it->second;
  };
  std::vector<std::string> numeric = schema.numeric;
  if (numeric.empty()) {
    std::set<std::string> textual(schema.text.begin(), schema.text.end());
    for (const auto& h : header)
      if (!textual.count(h)) numeric.push_back(h);
  }
  std::vector<std::size_t> num_idx, text_idx;
  for (const auto& c : numeric) num_idx.push_back(locate(c));
  for (const auto& c : schema.text) text_idx.push_back(locate(c));

  TabularSource src;
  src.columns = numeric;
  src.provenance = path.string();
  for (const auto& c : schema.text) src.text[c];
  std::vector<double> flat;
  std::vector<double> row(numeric.size());
  Index rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split(line);
    bool ok = fields.size() == header.size();
    for (std::size_t k = 0; ok && k < num_idx.size(); ++k) ok = parse_double(fields[num_idx[k]], row[k]);
    if (!ok) {
      ++src.dropped_rows;
      continue;
    }
    flat.insert(flat.end(), row.begin(), row.end());
    for (std::size_t k = 0; k < text_idx.size(); ++k) src.text[schema.text[k]].emplace_back(fields[text_idx[k]]);
    ++rows;
  }
  src.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, static_cast<Index>(numeric.size()));
  if (src.dropped_rows > 0)
    log::warn(path.string() + ": dropped " + std::to_string(src.dropped_rows) + " malformed rows");
  return src;
}

Eigen::VectorXi binarize_median(const Eigen::VectorXd& values) {
  if (values.size() == 0 || values.maxCoeff() == values.minCoeff())
    throw Error(ErrorCode::ConstantColumn, "cannot binarize a constant column");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return (values.array() > median).cast<int>();
}

RealProtocol protocol_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  try {
    RealProtocol p;
    p.label = j.at("label").get<std::string>();
    auto rule = j.value("binarize", std::string("none"));
    if (rule == "median")
      p.binarize = Binarize::Median;
    else if (rule == "none")
      p.binarize = Binarize::None;
    else
      throw Error(ErrorCode::InvalidConfig, "binarize must be median or none, got " + rule);
    auto resolve = [&](const std::string& s) {
      fs::path f(s);
      return f.is_relative() && !base_dir.empty() ? base_dir / f : f;
    };
    p.graph_file = resolve(j.at("graph_file").get<std::string>());
    if (j.contains("data_file")) p.data_file = resolve(j.at("data_file").get<std::string>());
    const auto& s = j.at("sizes");
    p.sizes.labelled = s.at("l").get<Index>();
    p.sizes.unlabelled = s.at("u").get<Index>();
    p.sizes.validation = s.at("v").get<Index>();
    p.sizes.test = s.value("t", Index{0});
    p.trials = j.value("trials", 100);
    p.seed = j.value("seed", std::uint64_t{0});
    if (p.sizes.labelled <= 0 || p.sizes.unlabelled <= 0 || p.sizes.validation <= 0 || p.sizes.test < 0 ||
        p.trials <= 0)
      throw Error(ErrorCode::InvalidConfig, "protocol sizes and trials must be positive");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("protocol: ") + e.what());
  }
}

RealProtocol load_protocol(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return protocol_from_json(j, path.parent_path());
}

Dataset dataset_from_source(const TabularSource& src, const CausalGraph& g, const std::string& label_column,
                            Binarize rule, const std::string& name) {
  Dataset d;
  d.name = name;
  const Eigen::VectorXd raw = src.values.col(src.column(label_column));
  if (rule == Binarize::Median) {
    d.labels = binarize_median(raw);
  } else {
    if (!((raw.array() == 0.0) || (raw.array() == 1.0)).all())
      throw Error(ErrorCode::ParseError, "label column " + label_column + " is not binary");
    d.labels = raw.cast<int>();
  }
  for (const auto& node : g.nodes()) {
    if (node.kind == NodeKind::Label) continue;
    auto names = node.column_names();
    if (static_cast<int>(names.size()) != node.dim)
      throw Error(ErrorCode::InvalidConfig, "node " + node.id + " declares dim " + std::to_string(node.dim) +
                                                " but " + std::to_string(names.size()) + " columns");
    Eigen::MatrixXd block(src.values.rows(), node.dim);
    for (int k = 0; k < node.dim; ++k) block.col(k) = src.values.col(src.column(names[static_cast<std::size_t>(k)]));
    d.features.emplace(node.id, std::move(block));
  }
  return d;
}

Partitions make_trial_partitions(const Eigen::VectorXi& labels, const PartitionSizes& sizes, std::uint64_t seed,
                                 int max_retries) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    auto p = shuffle_partitions(labels.size(), sizes, derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    bool zero = false, one = false;
    for (auto i : p.labelled) (labels(i) ? one : zero) = true;
    if (zero && one) return p;
  }
  throw Error(ErrorCode::ClassCoverageFailure,
              "no labelled partition with both classes after " + std::to_string(max_retries) + " shuffles");
}

FactorPlan group_joint_roots(const FactorPlan& plan, const CausalGraph& g) {
  const auto roles = assign_roles(g);
  auto mergeable = [&](const FactorEntry& e) {
    if (e.scenario != Scenario::C || e.factors.size() != 1) return false;
    auto it = roles.find(e.factors.front().target);
    return it != roles.end() && (it->second == Role::Cause || it->second == Role::Spouse);
  };
  auto n = std::count_if(plan.entries.begin(), plan.entries.end(), mergeable);
  if (n < 2) return plan;
  FactorPlan out = plan;
  out.entries.clear();
  FactorEntry merged{Scenario::C, {}};
  std::size_t slot = 0;
  for (const auto& e : plan.entries) {
    if (mergeable(e)) {
      if (merged.factors.empty()) slot = out.entries.size();
      merged.factors.push_back(e.factors.front());
    } else {
      out.entries.push_back(e);
    }
  }
  std::sort(merged.factors.begin(), merged.factors.end(),
            [](const Factor& a, const Factor& b) { return a.target < b.target; });
  out.entries.insert(out.entries.begin() + static_cast<std::ptrdiff_t>(slot), std::move(merged));
  return out;
}

void write_dataset_csv(const Dataset& d, const CausalGraph& g, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<char> tag(static_cast<std::size_t>(d.rows()), 0);
  auto mark = [&](const std::vector<Index>& idx, char c) {
    for (auto i : idx) tag[static_cast<std::size_t>(i)] = c;
  };
  mark(d.partitions.labelled, 'l');
  mark(d.partitions.unlabelled, 'u');
  mark(d.partitions.validation, 'v');
  mark(d.partitions.test, 't');

  std::vector<const Eigen::MatrixXd*> blocks;
  std::ostringstream out;
  for (const auto& id : topological_order(g)) {
    if (id == g.label()) continue;
    blocks.push_back(&d.values(id));
    for (const auto& c : g.node(id).column_names()) out << c << ',';
  }
  out << g.node(g.label()).column_names().front() << ",partition\n";
  for (Index r = 0; r < d.rows(); ++r) {
    for (const auto* b : blocks)
      for (Index c = 0; c < b->cols(); ++c) out << format_double((*b)(r, c)) << ',';
    out << d.labels(r) << ',';
    if (char c = tag[static_cast<std::size_t>(r)]) out << c;
    out << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  f << out.str();
}

Dataset read_dataset_csv(const fs::path& path, const CausalGraph& g, const std::string& name) {
  auto numeric = value_columns(g);
  const auto label_col = g.node(g.label()).column_names().front();
  numeric.push_back(label_col);
  auto src = load_csv(path, {numeric, {"partition"}});
  if (src.dropped_rows > 0) throw Error(ErrorCode::ParseError, path.string() + " has malformed rows");
  Dataset d = dataset_from_source(src, g, label_col, Binarize::None, name.empty() ? path.stem().string() : name);
  const auto& tags = src.text.at("partition");
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto r = static_cast<Index>(i);
    if (tags[i] == "l")
      d.partitions.labelled.push_back(r);
    else if (tags[i] == "u")
      d.partitions.unlabelled.push_back(r);
    else if (tags[i] == "v")
      d.partitions.validation.push_back(r);
    else if (tags[i] == "t")
      d.partitions.test.push_back(r);
    else if (!tags[i].empty())
      throw Error(ErrorCode::ParseError, "unknown partition tag '" + tags[i] + "'");
  }
  return d;
}

}  // namespace cssl
