#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cssl/error.hpp"
#include "cssl/experiment.hpp"

using namespace cssl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / "cssl_exp_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ResultRow row(const std::string& ds, Method m, int trial, double delta, double acc = 0.5) {
  ResultRow r;
  r.dataset = ds;
  r.trial = trial;
  r.seed = 7;
  r.result.method = m;
  r.result.acc_u = acc;
  r.result.acc_t = acc;
  r.result.delta_u = delta;
  r.result.delta_t = delta;
  return r;
}

ExperimentConfig small(const fs::path& out) {
  ExperimentConfig c;
  c.graph = BenchmarkGraph::CG1;
  c.unlabelled = 100;
  c.methods = {Method::P_SUP, Method::F_SUP};
  c.trials = 3;
  c.seed = 5;
  c.out = out;
  c.pipeline.classifier.max_epochs = 15;
  return c;
}

}  // namespace

TEST_CASE("summary statistics") {
  auto one = summarize({row("d", Method::CGAN_SSL, 0, 4.0)});
  REQUIRE(one.size() == 1);
  CHECK(one[0].mean == 4.0);
  CHECK(one[0].stddev == 0.0);
  CHECK(one[0].median == 4.0);

  auto two = summarize({row("d", Method::CGAN_SSL, 0, 0.0), row("d", Method::CGAN_SSL, 1, 10.0)});
  CHECK(two[0].mean == 5.0);
  CHECK(two[0].stddev == doctest::Approx(7.0710678).epsilon(1e-8));
  CHECK(two[0].q1 == 2.5);
  CHECK(two[0].q3 == 7.5);
  CHECK(mean_pm_std(5.0, two[0].stddev) == "5.000 \xC2\xB1 7.071");

  CHECK(quantile_sorted({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile_sorted({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(std::isnan(quantile_sorted({}, 0.5)));

  CHECK_THROWS_AS(summarize({}), Error);
  try {
    summarize({});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyResults);
  }
}

TEST_CASE("summary against a one-pass oracle") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(1.0, 3.0);
  for (int c = 0; c < 20; ++c) {
    std::vector<ResultRow> rows;
    const int n = 2 + c * 3;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = nd(rng);
      rows.push_back(row("x", Method::F_SUP, i, v));
      s1 += v;
      s2 += v * v;
    }
    auto err = row("x", Method::F_SUP, n, 0.0);
    err.result.error = ErrorCode::SingleClassSample;
    err.result.delta_u = std::nan("");
    rows.push_back(err);
    const auto s = summarize(rows).at(0);
    CHECK(s.n == n);
    CHECK(s.errors == 1);
    CHECK(std::abs(s.mean - s1 / n) <= 1e-9);
    CHECK(std::abs(s.stddev - std::sqrt((s2 - s1 * s1 / n) / (n - 1))) <= 1e-9);
    CHECK(s.min <= s.q1);
    CHECK(s.q1 <= s.median);
    CHECK(s.median <= s.q3);
    CHECK(s.q3 <= s.max);
  }
}

TEST_CASE("all-error groups") {
  auto r = row("d", Method::GCGAN_SSL, 0, std::nan(""));
  r.result.error = ErrorCode::JointModeUnavailable;
  auto s = summarize({r, row("d", Method::P_SUP, 0, 0.0)});
  REQUIRE(s.size() == 2);
  CHECK(s[0].method == Method::P_SUP);
  CHECK(s[1].n == 0);
  CHECK(s[1].errors == 1);
  CHECK(std::isnan(s[1].mean));
  auto dir = fresh_dir("errs");
  write_report({r}, dir);
  CHECK(slurp(dir / "summary.csv").find("GCGAN_SSL,0,1,nan") != std::string::npos);
  CHECK(slurp(dir / "deltas.csv").find("JointModeUnavailable") != std::string::npos);
}

TEST_CASE("row json round trip") {
  auto r = row("CG3", Method::ENT_MIN, 4, -2.5, 0.75);
  r.result.acc_t = std::nan("");
  auto j = row_to_json(r);
  CHECK(j["acc_t"].is_null());
  auto b = row_from_json(j);
  CHECK(b.dataset == "CG3");
  CHECK(b.trial == 4);
  CHECK(b.result.method == Method::ENT_MIN);
  CHECK(b.result.acc_u == 0.75);
  CHECK(std::isnan(b.result.acc_t));
  CHECK(!b.result.error);
  r.result.error = ErrorCode::MissingModel;
  r.result.message = "m";
  CHECK(row_from_json(row_to_json(r)).result.error == ErrorCode::MissingModel);
  CHECK(row_key("a", 1, Method::P_SUP) != row_key("a", 1, Method::F_SUP));
}

TEST_CASE("experiment config json") {
  ExperimentConfig c;
  c.graph = BenchmarkGraph::CG4;
  c.methods = {Method::CGAN_SSL};
  c.trials = 9;
  auto back = experiment_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.graph == BenchmarkGraph::CG4);
  CHECK_THROWS_AS(experiment_from_json({{"trails", 3}}), Error);
  CHECK(synthetic_sizes(500).test == 500);
  CHECK(synthetic_sizes(500).labelled == 40);
}

TEST_CASE("run, resume and report") {
  auto dir = fresh_dir("run");
  auto cfg = small(dir);
  auto s = run_experiment(cfg);
  CHECK(s.trials_run == 3);
  CHECK(s.rows_written == 6);
  auto rows = read_results(dir / "results.jsonl");
  REQUIRE(rows.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(rows[i].trial == i / 2);
    CHECK(rows[i].dataset == "CG1");
  }
  write_report(rows, dir);
  const auto summary = slurp(dir / "summary.csv");
  const auto deltas = slurp(dir / "deltas.csv");
  const auto results = slurp(dir / "results.jsonl");

  auto rerun = run_experiment(cfg);
  CHECK(rerun.trials_run == 0);
  CHECK(rerun.trials_skipped == 3);
  CHECK(slurp(dir / "results.jsonl") == results);

  auto other = fresh_dir("run_other");
  auto cfg2 = cfg;
  cfg2.out = other;
  cfg2.jobs = 3;
  run_experiment(cfg2);
  CHECK(slurp(other / "results.jsonl") == results);
  write_report(read_results(other / "results.jsonl"), other);
  CHECK(slurp(other / "summary.csv") == summary);
  CHECK(slurp(other / "deltas.csv") == deltas);

  auto part = fresh_dir("run_part");
  auto cfg3 = cfg;
  cfg3.out = part;
  CHECK(run_experiment(cfg3, 1).trials_run == 1);
  {
    auto text = slurp(part / "results.jsonl");
    std::ofstream(part / "results.jsonl", std::ios::binary) << text << R"({"dataset":"CG1","tri)";
  }
  CHECK(read_results(part / "results.jsonl").size() == 2);
  auto resumed = run_experiment(cfg3);
  CHECK(resumed.trials_run == 2);
  CHECK(slurp(part / "results.jsonl") == results);

  std::set<std::string> keys;
  for (const auto& r : read_results(part / "results.jsonl")) keys.insert(row_key(r.dataset, r.trial, r.result.method));
  CHECK(keys.size() == 6);
}

TEST_CASE("partially completed trials only rerun missing methods") {
  auto dir = fresh_dir("methods");
  auto cfg = small(dir);
  cfg.trials = 1;
  cfg.methods = {Method::P_SUP};
  run_experiment(cfg);
  cfg.methods = {Method::P_SUP, Method::F_SUP};
  auto s = run_experiment(cfg);
  CHECK(s.rows_written == 1);
  auto rows = read_results(dir / "results.jsonl");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].result.method == Method::F_SUP);
}

TEST_CASE("malformed results") {
  auto dir = fresh_dir("bad");
  std::ofstream(dir / "r.jsonl", std::ios::binary) << "not json\n"
                                                   << row_to_json(row("d", Method::P_SUP, 0, 0)).dump() << '\n';
  CHECK_THROWS_AS(read_results(dir / "r.jsonl"), Error);
  CHECK(read_results(dir / "missing.jsonl").empty());
}
