#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cssl/causal_graph.hpp"
#include "cssl/dataset_io.hpp"
#include "cssl/error.hpp"
#include "cssl/experiment.hpp"
#include "cssl/log.hpp"
#include "cssl/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cssl;

namespace {

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
      return 1;
    case ErrorCode::CycleDetected:
    case ErrorCode::MultipleLabels:
    case ErrorCode::UnknownNode:
    case ErrorCode::DuplicateNode:
    case ErrorCode::InvalidEdge:
    case ErrorCode::InvalidDims:
    case ErrorCode::BalanceRejectionExhausted:
    case ErrorCode::ParseError:
    case ErrorCode::MissingColumn:
    case ErrorCode::ConstantColumn:
    case ErrorCode::InsufficientRows:
    case ErrorCode::ClassCoverageFailure:
    case ErrorCode::EmptyResults:
      return 2;
    default:
      return 3;
  }
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_method(item));
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty --methods list");
  return out;
}

CausalGraph graph_arg(const std::string& target) {
  if (fs::exists(target)) return load_graph_file(target);
  return benchmark_graph(parse_benchmark(target));
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

void print_plan(const FactorPlan& plan, const std::string& label) {
  std::cout << to_string(plan.mode) << " plan";
  if (plan.mode == PlanMode::Joint && plan.same_as_disjoint) std::cout << " (same as disjoint)";
  std::cout << ":\n";
  for (const auto& e : plan.entries) std::cout << "  " << to_char(e.scenario) << "  " << e.describe(label) << '\n';
}

int inspect(const std::string& target, bool as_json) {
  const auto g = graph_arg(target);
  const auto blanket = markov_blanket(g);
  const auto roles = assign_roles(g);
  const auto disjoint = classify_disjoint(g);
  const auto joint = classify_joint(g);
  if (as_json) {
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [id, role] : roles) r[id] = std::string(to_string(role));
    std::cout << nlohmann::json{{"graph", graph_to_json(g)},
                                {"markov_blanket", std::vector<std::string>(blanket.begin(), blanket.end())},
                                {"roles", r},
                                {"order", topological_order(g)},
                                {"disjoint", plan_to_json(disjoint, g.label())},
                                {"joint", plan_to_json(joint, g.label())}}
                     .dump(2)
              << '\n';
    return 0;
  }
  std::cout << "label: " << g.label() << '\n';
  std::cout << "nodes:\n";
  for (const auto& n : g.nodes()) {
    std::cout << "  " << n.id << " dim=" << n.dim;
    if (!n.columns.empty()) std::cout << " columns=[" << join(n.columns) << "]";
    std::cout << '\n';
  }
  std::cout << "order: " << join(topological_order(g)) << '\n';
  std::cout << "markov blanket: " << join({blanket.begin(), blanket.end()}) << '\n';
  std::cout << "roles:\n";
  for (const auto& [id, role] : roles) std::cout << "  " << id << ": " << to_string(role) << '\n';
  print_plan(disjoint, g.label());
  print_plan(joint, g.label());
  return 0;
}

int gen_data(const std::string& graph, Eigen::Index du, int n, std::uint64_t seed, const fs::path& out) {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "--n must be at least 1");
  const auto bg = parse_benchmark(graph);
  const fs::path root = out / to_string(bg);
  int rejected = 0;
  for (int i = 0; i < n; ++i) {
    const auto cfg = instance_config(bg, du, seed, i);
    const auto inst = generate(cfg);
    char stem[32];
    std::snprintf(stem, sizeof stem, "instance_%03d", i);
    const fs::path dir = root / stem;
    fs::create_directories(dir);
    write_dataset_csv(inst.data, inst.graph, dir / "data.csv");
    std::ofstream(dir / "params.json") << params_to_json(inst.params, cfg).dump(2) << '\n';
    rejected += inst.params.attempts - 1;
  }
  std::cout << to_string(bg) << ": accepted " << n << " instances, rejected " << rejected << " draws -> "
            << root.string() << '\n';
  return 0;
}

void print_summary(const std::vector<SummaryRow>& rows) {
  std::printf("%-12s %-10s %4s %4s  %-22s %10s\n", "dataset", "method", "n", "err", "delta mean ± std", "acc_u");
  for (const auto& s : rows)
    std::printf("%-12s %-10s %4d %4d  %-22s %10.4f\n", s.dataset.c_str(), std::string(to_string(s.method)).c_str(), s.n,
                s.errors, s.n ? mean_pm_std(s.mean, s.stddev).c_str() : "-", s.mean_acc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal generative semi-supervised classification"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "progress messages");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  std::string graph;
  Eigen::Index du = 1000;
  int n = 1;
  std::uint64_t seed = 0;
  std::string methods;
  int jobs = 1;
  if (const char* env = std::getenv("CSSL_JOBS")) jobs = std::max(1, std::atoi(env));
  std::string out = "out";
  std::string config_file, protocol, data_dir;

  auto* gen = app.add_subcommand("gen-data", "write synthetic benchmark instances");
  gen->add_option("--graph", graph, "CG1..CG7")->required();
  gen->add_option("--du", du, "|D_u| (and |D_t|)");
  gen->add_option("--n", n, "instances");
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--out", out, "output root");

  auto* run = app.add_subcommand("run", "run methods over trials");
  auto* o_graph = run->add_option("--graph", graph, "CG1..CG7");
  auto* o_du = run->add_option("--du", du, "|D_u| (and |D_t|)");
  auto* o_n = run->add_option("--n", n, "trials");
  auto* o_seed = run->add_option("--seed", seed, "master seed");
  auto* o_methods = run->add_option("--methods", methods, "comma list, default all");
  auto* o_jobs = run->add_option("--jobs", jobs, "parallel trials (CSSL_JOBS)");
  auto* o_out = run->add_option("--out", out, "output directory");
  run->add_option("--config", config_file, "JSON experiment config")->check(CLI::ExistingFile);
  auto* o_protocol = run->add_option("--protocol", protocol, "real-data protocol JSON")->check(CLI::ExistingFile);
  auto* o_data = run->add_option("--data", data_dir, "gen-data directory")->check(CLI::ExistingDirectory);
  bool no_report = false;
  run->add_flag("--no-report", no_report, "skip writing the summary");

  std::vector<std::string> inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "aggregate result rows");
  report->add_option("inputs", inputs, "results.jsonl files")->required();
  report->add_option("--out", report_out, "output directory (default: first input's directory)");

  std::string target;
  bool as_json = false;
  auto* insp = app.add_subcommand("inspect-graph", "print blanket, roles and factor plans");
  insp->add_option("graph", target, "graph file or CG1..CG7")->required();
  insp->add_flag("--json", as_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  log::set_level(quiet ? log::Level::Quiet : verbose ? log::Level::Info : log::Level::Warn);

  try {
    if (*gen) return gen_data(graph, du, n, seed, out);
    if (*insp) return inspect(target, as_json);
    if (*report) {
      std::vector<ResultRow> rows;
      for (const auto& p : inputs) {
        if (!fs::exists(p)) throw Error(ErrorCode::ParseError, "no such file " + p);
        auto r = read_results(p);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      const fs::path dir = report_out.empty() ? fs::path(inputs.front()).parent_path() : fs::path(report_out);
      write_report(rows, dir);
      print_summary(summarize(rows));
      return 0;
    }

    ExperimentConfig cfg;
    cfg.jobs = jobs;
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
      std::ifstream f(config_file);
      try {
        f >> j;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, config_file + ": " + e.what());
      }
      cfg = experiment_from_json(j, cfg);
    }
    if (o_graph->count()) cfg.graph = parse_benchmark(graph);
    if (o_du->count()) cfg.unlabelled = du;
    if (o_n->count()) cfg.trials = n;
    if (o_seed->count()) cfg.seed = seed;
    if (o_methods->count()) cfg.methods = parse_methods(methods);
    if (o_jobs->count()) cfg.jobs = jobs;
    if (o_out->count() || cfg.out.empty()) cfg.out = out;
    if (o_protocol->count()) cfg.protocol = protocol;
    if (o_data->count()) cfg.data_dir = data_dir;
    if (!cfg.protocol.empty()) {
      const auto proto = load_protocol(cfg.protocol);
      if (!o_n->count() && !j.contains("n")) cfg.trials = proto.trials;
      if (!o_seed->count() && !j.contains("seed")) cfg.seed = proto.seed;
    }
    if (!cfg.protocol.empty() && cfg.graph)
      throw Error(ErrorCode::InvalidConfig, "--graph and --protocol are exclusive");
    if (!cfg.data_dir.empty() && !cfg.graph) throw Error(ErrorCode::InvalidConfig, "--data needs --graph");
    if (cfg.protocol.empty() && !cfg.graph) throw Error(ErrorCode::InvalidConfig, "run needs --graph or --protocol");
    if (cfg.trials < 1) throw Error(ErrorCode::InvalidConfig, "--n must be at least 1");
    if (cfg.jobs < 1) throw Error(ErrorCode::InvalidConfig, "--jobs must be at least 1");

    fs::create_directories(cfg.out);
    std::ofstream(cfg.out / "config.json") << to_json(cfg).dump(2) << '\n';
    const auto s = run_experiment(cfg);
    std::cout << "trials run " << s.trials_run << ", skipped " << s.trials_skipped << ", rows " << s.rows_written
              << ", error rows " << s.error_rows << '\n';
    if (!no_report) {
      const auto rows = read_results(cfg.out / "results.jsonl");
      write_report(rows, cfg.out);
      print_summary(summarize(rows));
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
