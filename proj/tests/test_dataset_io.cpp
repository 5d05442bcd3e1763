#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cssl/dataset.hpp"
#include "cssl/dataset_io.hpp"
#include "cssl/error.hpp"
#include "cssl/synthetic.hpp"

using namespace cssl;
namespace fs = std::filesystem;
using Eigen::Index;

namespace {

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / "cssl_io_test";
  fs::create_directories(d);
  return d / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::string> listing(const FactorPlan& p, const std::string& label) {
  std::vector<std::string> out;
  for (const auto& e : p.entries) out.push_back(std::string(1, to_char(e.scenario)) + " " + e.describe(label));
  return out;
}

}  // namespace

TEST_CASE("load_csv") {
  write(scratch("ok.csv"), "a,b,c\n1,2,3\n4,5,6\n");
  auto s = load_csv(scratch("ok.csv"));
  CHECK(s.columns.size() == 3);
  CHECK(s.values.rows() == 2);
  CHECK(s.values(1, 2) == 6.0);
  CHECK(s.dropped_rows == 0);

  write(scratch("bad.csv"), "a,b\n1,2\nx,3\n4,5\n6\n");
  auto b = load_csv(scratch("bad.csv"));
  CHECK(b.values.rows() == 2);
  CHECK(b.dropped_rows == 2);

  CHECK_THROWS_AS(load_csv(scratch("ok.csv"), CsvSchema{{"a", "zz"}, {}}), Error);
  try {
    load_csv(scratch("ok.csv"), CsvSchema{{"zz"}, {}});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
  CHECK_THROWS_AS(load_csv(scratch("missing.csv")), Error);
  CHECK_THROWS_AS((void)s.column("q"), Error);

  write(scratch("text.csv"), "id,v\nalpha,1.5\nbeta,2.5\n");
  auto t = load_csv(scratch("text.csv"), CsvSchema{{}, {"id"}});
  CHECK(t.columns == std::vector<std::string>{"v"});
  CHECK(t.text.at("id")[1] == "beta");
}

TEST_CASE("binarize_median") {
  Eigen::VectorXd v(4);
  v << 1, 2, 3, 4;
  CHECK(binarize_median(v) == (Eigen::VectorXi(4) << 0, 0, 1, 1).finished());
  Eigen::VectorXd odd(5);
  odd << 3, 1, 2, 2, 9;  // median 2, ties go to 0
  CHECK(binarize_median(odd) == (Eigen::VectorXi(5) << 1, 0, 0, 0, 1).finished());
  CHECK_THROWS_AS(binarize_median(Eigen::VectorXd::Constant(3, 5.0)), Error);

  Rng rng(4);
  for (int n : {11, 50, 201}) {
    Eigen::VectorXd x = standard_normal(n, 1, rng).col(0);
    const double rate = binarize_median(x).cast<double>().mean();
    CHECK(rate >= 0.5 - 1.0 / n);
    CHECK(rate <= 0.5 + 1.0 / n);
  }
}

TEST_CASE("trial partitions") {
  Eigen::VectorXi labels = Eigen::VectorXi::Zero(569);
  labels.head(212).setOnes();
  PartitionSizes sizes{10, 424, 10, 0};
  auto a = make_trial_partitions(labels, sizes, 1);
  auto b = make_trial_partitions(labels, sizes, 2);
  CHECK(a == make_trial_partitions(labels, sizes, 1));
  CHECK(a.labelled != b.labelled);
  CHECK(a.labelled.size() == 10);
  CHECK(a.unlabelled.size() == 424);
  CHECK(a.validation.size() == 10);
  CHECK(a.test.empty());
  std::set<Index> seen;
  for (const auto* part : {&a.labelled, &a.unlabelled, &a.validation}) seen.insert(part->begin(), part->end());
  CHECK(seen.size() == 444);
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto p = make_trial_partitions(labels, sizes, s);
    std::set<int> classes;
    for (auto i : p.labelled) classes.insert(labels(i));
    CHECK(classes.size() == 2);
  }
  CHECK_THROWS_AS(make_trial_partitions(labels, {10, 600, 10, 0}, 1), Error);
  try {
    make_trial_partitions(Eigen::VectorXi::Zero(100), {10, 10, 10, 0}, 1, 20);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassCoverageFailure);
  }
}

TEST_CASE("group_joint_roots") {
  auto cg6 = benchmark_graph(BenchmarkGraph::CG6);
  using V = std::vector<std::string>;
  auto dis = group_joint_roots(classify_disjoint(cg6), cg6);
  CHECK(listing(dis, "Y") == V{"C P(X_C,X_S)", "B P(Y|X_C)", "E P(X_E|Y,X_C,X_S)"});
  auto joint = group_joint_roots(classify_joint(cg6), cg6);
  CHECK(listing(joint, "Y") == V{"C P(X_C,X_S)", "F P(X_E|Y,X_C,X_S)P(Y|X_C)"});
  auto cg3 = benchmark_graph(BenchmarkGraph::CG3);
  CHECK(group_joint_roots(classify_disjoint(cg3), cg3).entries == classify_disjoint(cg3).entries);

  for (int gi = 0; gi < 7; ++gi) {
    auto g = benchmark_graph(static_cast<BenchmarkGraph>(gi));
    for (const auto& plan : {classify_disjoint(g), classify_joint(g)}) {
      std::multiset<std::string> before, after;
      for (const auto& e : plan.entries)
        for (const auto& t : e.targets()) before.insert(t);
      for (const auto& e : group_joint_roots(plan, g).entries)
        for (const auto& t : e.targets()) after.insert(t);
      CHECK(before == after);
    }
  }
}

TEST_CASE("protocol parsing") {
  nlohmann::json j = {{"label", "diagnosis"},
                      {"binarize", "none"},
                      {"graph_file", "g.json"},
                      {"data_file", "d.csv"},
                      {"sizes", {{"l", 10}, {"u", 424}, {"v", 10}}},
                      {"trials", 10},
                      {"seed", 3}};
  auto p = protocol_from_json(j, "/base");
  CHECK(p.graph_file == fs::path("/base/g.json"));
  CHECK(p.sizes.labelled == 10);
  CHECK(p.sizes.test == 0);
  CHECK(p.trials == 10);
  j["binarize"] = "mean";
  CHECK_THROWS_AS(protocol_from_json(j), Error);
  j["binarize"] = "median";
  j["sizes"]["l"] = 0;
  CHECK_THROWS_AS(protocol_from_json(j), Error);
  j.erase("label");
  CHECK_THROWS_AS(protocol_from_json(j), Error);
}

TEST_CASE("dataset from source") {
  write(scratch("src.csv"), "f1,f2,f3,y\n1,2,3,0\n4,5,6,1\n7,8,9,1\n");
  auto src = load_csv(scratch("src.csv"));
  auto g = build_graph({{"A", NodeKind::Feature, 2, {"f1", "f3"}}, {"y", NodeKind::Label, 1, {}}}, {{"A", "y"}}, "y");
  auto d = dataset_from_source(src, g, "y", Binarize::None, "toy");
  CHECK(d.values("A")(1, 1) == 6.0);
  CHECK(d.labels == (Eigen::VectorXi(3) << 0, 1, 1).finished());
  auto med = dataset_from_source(src, g, "f2", Binarize::Median, "toy");
  CHECK(med.labels == (Eigen::VectorXi(3) << 0, 0, 1).finished());
  CHECK_THROWS_AS(dataset_from_source(src, g, "f2", Binarize::None, "toy"), Error);
  auto bad = build_graph({{"A", NodeKind::Feature, 1, {"nope"}}, {"y", NodeKind::Label, 1, {}}}, {{"A", "y"}}, "y");
  CHECK_THROWS_AS(dataset_from_source(src, bad, "y", Binarize::None, "toy"), Error);
}

TEST_CASE("standardize uses labelled and unlabelled rows") {
  Dataset d;
  d.features["X"] = Eigen::MatrixXd(6, 2);
  d.features["X"] << 1, 5, 2, 5, 3, 5, 100, 5, -100, 5, 7, 5;
  d.labels = Eigen::VectorXi::Zero(6);
  d.partitions = {{0, 1}, {2}, {3}, {4, 5}};
  auto s = standardize(d);
  const auto& x = s.values("X");
  CHECK(x(0, 0) == doctest::Approx(-1.0));
  CHECK(x(1, 0) == doctest::Approx(0.0));
  CHECK(x(2, 0) == doctest::Approx(1.0));
  CHECK(x.col(1).isZero());
  CHECK(x(3, 0) == doctest::Approx(98.0));
}

TEST_CASE("dataset csv round trip is exact") {
  SynthConfig c;
  c.graph = BenchmarkGraph::CG7;
  c.seed = 8;
  c.sizes = {40, 300, 40, 300};
  auto inst = generate(c);
  write_dataset_csv(inst.data, inst.graph, scratch("cg7.csv"));
  auto back = read_dataset_csv(scratch("cg7.csv"), inst.graph);
  for (const auto& [id, m] : inst.data.features) CHECK(back.values(id) == m);
  CHECK(back.labels == inst.data.labels);
  CHECK(back.partitions == inst.data.partitions);
  auto other = build_graph({{"Z", NodeKind::Feature, 1, {}}, {"Y", NodeKind::Label, 1, {}}}, {{"Z", "Y"}}, "Y");
  CHECK_THROWS_AS(read_dataset_csv(scratch("cg7.csv"), other), Error);
}
