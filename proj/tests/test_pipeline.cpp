#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cssl/dataset.hpp"
#include "cssl/error.hpp"
#include "cssl/pipeline.hpp"
#include "cssl/synthetic.hpp"

using namespace cssl;
using Eigen::Index;

namespace {

SynthInstance instance(BenchmarkGraph g, std::uint64_t seed, Index du = 200) {
  SynthConfig c;
  c.graph = g;
  c.seed = seed;
  c.sizes = {40, du, 40, du};
  return generate(c);
}

PipelineConfig quick() {
  PipelineConfig p;
  p.classifier.max_epochs = 40;
  p.scm.epochs = 3;
  return p;
}

LabelledSet subset(const Dataset& d, const std::vector<Index>& idx) {
  auto vars = std::vector<std::string>();
  for (const auto& [id, m] : d.features) vars.push_back(id);
  return {gather(d, vars, idx), gather_labels(d, idx)};
}

bool same(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) return false;
  return true;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("CGAN-SSL") == Method::CGAN_SSL);
  CHECK(parse_method("GCGAN_SSL") == Method::GCGAN_SSL);
  CHECK(to_string(Method::ENT_MIN) == "ENT_MIN");
  CHECK_THROWS_AS(parse_method("SVM"), Error);
  CHECK(all_methods().size() == 5);
}

TEST_CASE("classifier features are the blanket") {
  CHECK(classifier_features(benchmark_graph(BenchmarkGraph::CG7)) == std::vector<std::string>{"X_C", "X_E", "X_S"});
  CHECK(classifier_features(benchmark_graph(BenchmarkGraph::CG2)) == std::vector<std::string>{"X_E"});
  CHECK(classifier_features(benchmark_graph(BenchmarkGraph::CG6)) ==
        std::vector<std::string>{"X_C", "X_E", "X_S"});
}

TEST_CASE("separable data reaches full validation accuracy") {
  Rng rng(3);
  auto make = [&](Index n) {
    LabelledSet s{standard_normal(n, 2, rng), Eigen::VectorXi(n)};
    for (Index i = 0; i < n; ++i) {
      s.y(i) = i % 2;
      s.x(i, 0) += s.y(i) ? 4.0 : -4.0;
    }
    return s;
  };
  const auto dl = make(40), dv = make(40);
  ClassifierConfig cfg;
  cfg.max_epochs = 100;
  TrainHistory h;
  auto c = train_classifier(dl, nullptr, dv, cfg, 5, &h);
  CHECK(evaluate(c, dv) == 1.0);
  CHECK(*std::max_element(h.phase1.begin(), h.phase1.end()) == 1.0);
  CHECK(h.phase1.size() < 100);
  CHECK(h.phase2.empty());

  auto again = train_classifier(dl, nullptr, dv, cfg, 5);
  CHECK(same(c.net, again.net));

  LabelledSet empty{Eigen::MatrixXd(0, 2), Eigen::VectorXi(0)};
  CHECK_THROWS_AS(evaluate(c, empty), Error);
  try {
    evaluate(c, empty);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyPartition);
  }
  LabelledSet one = dl;
  one.y.setZero();
  CHECK_THROWS_AS(train_classifier(one, nullptr, dv, cfg, 5), Error);
  CHECK_THROWS_AS(train_classifier(dl, nullptr, empty, cfg, 5), Error);
}

TEST_CASE("kept parameters score the best validation epoch") {
  auto inst = instance(BenchmarkGraph::CG1, 4);
  auto d = standardize(inst.data);
  const auto dl = subset(d, d.partitions.labelled), dv = subset(d, d.partitions.validation);
  const auto dg = subset(d, d.partitions.unlabelled);
  ClassifierConfig cfg;
  cfg.max_epochs = 60;
  TrainHistory h;
  auto c = train_classifier(dl, &dg, dv, cfg, 9, &h);
  REQUIRE(!h.phase2.empty());
  CHECK(evaluate(c, dv) == *std::max_element(h.phase2.begin(), h.phase2.end()));
  CHECK(static_cast<int>(h.phase1.size()) <= cfg.max_epochs);
}

TEST_CASE("ENT-MIN with zero weight follows P-SUP") {
  auto inst = instance(BenchmarkGraph::CG3, 6);
  auto d = standardize(inst.data);
  const auto dl = subset(d, d.partitions.labelled), dv = subset(d, d.partitions.validation);
  const auto du = subset(d, d.partitions.unlabelled);
  ClassifierConfig cfg;
  cfg.max_epochs = 30;
  TrainHistory hp, he;
  auto p = train_classifier(dl, nullptr, dv, cfg, 11, &hp);
  auto e = train_entmin(dl, du.x, dv, 0.0, cfg, 11, &he);
  CHECK(same(p.net, e.net));
  CHECK(hp.phase1 == he.phase1);
  CHECK(hp.loss == he.loss);
}

TEST_CASE("run_trial") {
  auto inst = instance(BenchmarkGraph::CG2, 2);
  auto cfg = quick();
  auto rows = run_trial(inst.data, inst.graph, all_methods(), cfg, 21);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].method == Method::P_SUP);
  CHECK(rows[0].delta_u == 0.0);
  CHECK(rows[0].delta_t == 0.0);
  for (const auto& r : rows) {
    if (r.method == Method::GCGAN_SSL) {
      REQUIRE(r.error.has_value());
      CHECK(*r.error == ErrorCode::JointModeUnavailable);
      CHECK(std::isnan(r.delta_u));
      continue;
    }
    CHECK(!r.error.has_value());
    CHECK(r.acc_u >= 0.0);
    CHECK(r.acc_u <= 1.0);
    CHECK(r.delta_u == doctest::Approx(100.0 * (r.acc_u - rows[0].acc_u)));
  }
  auto again = run_trial(inst.data, inst.graph, {Method::CGAN_SSL}, cfg, 21);
  CHECK(again[0].acc_u == rows[2].acc_u);
  CHECK(again[0].acc_t == rows[2].acc_t);
}

TEST_CASE("run_trial reports failures as rows") {
  auto inst = instance(BenchmarkGraph::CG3, 2);
  inst.data.partitions.validation.clear();
  auto rows = run_trial(inst.data, inst.graph, {Method::P_SUP, Method::F_SUP}, quick(), 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) CHECK(r.error == ErrorCode::EmptyPartition);
}

TEST_CASE("ancestor sampling ignores plan entry order") {
  auto inst = instance(BenchmarkGraph::CG6, 5);
  auto d = standardize(inst.data);
  auto cfg = quick();
  for (const auto& plan : {classify_disjoint(inst.graph), classify_joint(inst.graph)}) {
    auto fitted = fit_plan(plan, inst.graph, d, cfg, 3);
    auto base = ancestor_sample(fitted, inst.graph, 50, 17);
    CHECK(base.rows() == 50);
    for (const auto& [id, m] : base.features) CHECK(m.allFinite());

    FittedPlan rev = fitted;
    std::reverse(rev.plan.entries.begin(), rev.plan.entries.end());
    std::reverse(rev.models.begin(), rev.models.end());
    auto other = ancestor_sample(rev, inst.graph, 50, 17);
    CHECK(other.labels == base.labels);
    for (const auto& [id, m] : base.features) CHECK(other.values(id) == m);

    FittedPlan broken = fitted;
    broken.models.pop_back();
    CHECK_THROWS_AS(ancestor_sample(broken, inst.graph, 5, 1), Error);
  }
}

TEST_CASE("generated labels use both classes") {
  auto inst = instance(BenchmarkGraph::CG5, 8);
  auto d = standardize(inst.data);
  auto fitted = fit_plan(classify_disjoint(inst.graph), inst.graph, d, quick(), 4);
  auto gen = ancestor_sample(fitted, inst.graph, 400, 2);
  const double rate = gen.labels.cast<double>().mean();
  CHECK(rate > 0.2);
  CHECK(rate < 0.8);
}

TEST_CASE("pipeline config json") {
  PipelineConfig c;
  c.classifier.hidden = {8};
  c.scm.epochs = 7;
  c.joint.tau = 0.5;
  c.entmin_lambda = 0.3;
  c.group_roots = true;
  auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.classifier.hidden == std::vector<int>{8});
  CHECK(back.scm.epochs == 7);
  CHECK(back.group_roots);
  auto partial = config_from_json({{"scm", {{"epochs", 5}}}});
  CHECK(partial.scm.epochs == 5);
  CHECK(partial.classifier.max_epochs == PipelineConfig{}.classifier.max_epochs);
  CHECK_THROWS_AS(config_from_json({{"bogus", 1}}), Error);
  CHECK_THROWS_AS(config_from_json({{"scm", {{"lr", 1}}}}), Error);
  CHECK_THROWS_AS(config_from_json({{"joint", {{"tau", 0.0}}}}), Error);
  CHECK_THROWS_AS(config_from_json({{"entmin_lambda", "x"}}), Error);
}
