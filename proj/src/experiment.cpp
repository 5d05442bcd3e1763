#include "cssl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cssl/dataset_io.hpp"
#include "cssl/log.hpp"
#include "cssl/random.hpp"

namespace cssl {

namespace fs = std::filesystem;
using Eigen::Index;

namespace {

constexpr std::uint64_t kTrialStream = 1'000'000;

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double num_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::optional<ErrorCode> parse_code(const std::string& s) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::InvalidConfig); ++c)
    if (to_string(static_cast<ErrorCode>(c)) == s) return static_cast<ErrorCode>(c);
  return std::nullopt;
}

// Loads trial datasets for one experiment.
struct TrialSource {
  std::string name;
  std::function<std::pair<Dataset, CausalGraph>(int)> load;
};

TrialSource make_source(const ExperimentConfig& cfg) {
  if (!cfg.protocol.empty()) {
    const auto proto = load_protocol(cfg.protocol);
    if (proto.data_file.empty()) throw Error(ErrorCode::InvalidConfig, "protocol has no data_file");
    auto graph = std::make_shared<CausalGraph>(load_graph_file(proto.graph_file.string()));
    auto src = load_csv(proto.data_file);
    auto base = std::make_shared<Dataset>(
        dataset_from_source(src, *graph, proto.label, proto.binarize, proto.data_file.stem().string()));
    const auto sizes = proto.sizes;
    const auto seed = cfg.seed;
    return {base->name, [=](int trial) {
              Dataset d = *base;
              d.partitions = make_trial_partitions(d.labels, sizes, derive_seed(seed, static_cast<std::uint64_t>(trial)));
              return std::make_pair(std::move(d), *graph);
            }};
  }
  if (!cfg.graph) throw Error(ErrorCode::InvalidConfig, "experiment needs a graph or a protocol");
  const auto bg = *cfg.graph;
  if (!cfg.data_dir.empty()) {
    const auto dir = cfg.data_dir;
    return {to_string(bg), [=](int trial) {
              char stem[32];
              std::snprintf(stem, sizeof stem, "instance_%03d", trial);
              auto g = benchmark_graph(bg);
              auto d = read_dataset_csv(dir / stem / "data.csv", g, to_string(bg));
              return std::make_pair(std::move(d), std::move(g));
            }};
  }
  const auto du = cfg.unlabelled;
  const auto seed = cfg.seed;
  return {to_string(bg), [=](int trial) {
            auto inst = generate(instance_config(bg, du, seed, trial));
            return std::make_pair(std::move(inst.data), std::move(inst.graph));
          }};
}

}  // namespace

PartitionSizes synthetic_sizes(Index unlabelled) { return {40, unlabelled, 40, unlabelled}; }

SynthConfig instance_config(BenchmarkGraph g, Index unlabelled, std::uint64_t master_seed, int instance) {
  SynthConfig c;
  c.graph = g;
  c.seed = derive_seed(master_seed, static_cast<std::uint64_t>(instance));
  c.sizes = synthetic_sizes(unlabelled);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : c.methods) methods.push_back(std::string(to_string(m)));
  nlohmann::json j{{"du", c.unlabelled},
                   {"methods", methods},
                   {"n", c.trials},
                   {"seed", c.seed},
                   {"jobs", c.jobs},
                   {"out", c.out.string()},
                   {"pipeline", config_to_json(c.pipeline)}};
  j["graph"] = c.graph ? nlohmann::json(to_string(*c.graph)) : nlohmann::json(nullptr);
  j["protocol"] = c.protocol.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.protocol.string());
  j["data"] = c.data_dir.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.data_dir.string());
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig c) {
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "graph") {
        if (!v.is_null()) c.graph = parse_benchmark(v.get<std::string>());
      } else if (key == "du") {
        c.unlabelled = v.get<Index>();
      } else if (key == "protocol") {
        if (!v.is_null()) c.protocol = v.get<std::string>();
      } else if (key == "data") {
        if (!v.is_null()) c.data_dir = v.get<std::string>();
      } else if (key == "methods") {
        c.methods.clear();
        for (const auto& m : v) c.methods.push_back(parse_method(m.get<std::string>()));
      } else if (key == "n") {
        c.trials = v.get<int>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "jobs") {
        c.jobs = v.get<int>();
      } else if (key == "out") {
        c.out = v.get<std::string>();
      } else if (key == "pipeline") {
        c.pipeline = config_from_json(v, c.pipeline);
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown config key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::json row_to_json(const ResultRow& r) {
  const auto& m = r.result;
  return {{"dataset", r.dataset},
          {"trial", r.trial},
          {"seed", r.seed},
          {"method", std::string(to_string(m.method))},
          {"acc_u", num_or_null(m.acc_u)},
          {"acc_t", num_or_null(m.acc_t)},
          {"delta_u", num_or_null(m.delta_u)},
          {"delta_t", num_or_null(m.delta_t)},
          {"error", m.error ? nlohmann::json(std::string(to_string(*m.error))) : nlohmann::json(nullptr)},
          {"message", m.message}};
}

ResultRow row_from_json(const nlohmann::json& j) {
  ResultRow r;
  r.dataset = j.at("dataset").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.result.method = parse_method(j.at("method").get<std::string>());
  r.result.acc_u = num_from(j.at("acc_u"));
  r.result.acc_t = num_from(j.at("acc_t"));
  r.result.delta_u = num_from(j.at("delta_u"));
  r.result.delta_t = num_from(j.at("delta_t"));
  if (!j.at("error").is_null()) {
    r.result.error = parse_code(j.at("error").get<std::string>());
    if (!r.result.error) throw Error(ErrorCode::ParseError, "unknown error code in result row");
  }
  r.result.message = j.value("message", std::string());
  return r;
}

std::string row_key(const std::string& dataset, int trial, Method m) {
  return dataset + "|" + std::to_string(trial) + "|" + std::string(to_string(m));
}

std::vector<ResultRow> read_results(const fs::path& path, bool repair) {
  std::vector<ResultRow> rows;
  if (!fs::exists(path)) return rows;
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::size_t pos = 0, good_end = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string line = text.substr(pos, complete ? nl - pos : std::string::npos);
    const std::size_t next = complete ? nl + 1 : text.size();
    if (!line.empty()) {
      try {
        if (!complete) throw Error(ErrorCode::ParseError, "truncated row");
        rows.push_back(row_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception&) {
        if (next < text.size()) throw Error(ErrorCode::ParseError, path.string() + ": malformed row before end of file");
        log::warn(path.string() + ": dropping truncated trailing row");
        break;
      }
    }
    pos = next;
    good_end = next;
  }
  if (repair && good_end < text.size()) fs::resize_file(path, good_end);
  return rows;
}

RunSummary run_experiment(const ExperimentConfig& cfg, int max_new_trials) {
  if (cfg.trials < 1) throw Error(ErrorCode::InvalidConfig, "trial count must be at least 1");
  if (cfg.methods.empty()) throw Error(ErrorCode::InvalidConfig, "no methods requested");
  ExperimentConfig effective = cfg;
  if (!cfg.protocol.empty()) effective.pipeline.group_roots = true;
  const TrialSource source = make_source(effective);

  fs::create_directories(cfg.out);
  const fs::path results = cfg.out / "results.jsonl";
  const fs::path timings = cfg.out / "timings.jsonl";
  std::set<std::string> done;
  for (const auto& r : read_results(results, true)) done.insert(row_key(r.dataset, r.trial, r.result.method));
  if (fs::exists(timings)) {
    std::ifstream in(timings, std::ios::binary);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto nl = text.rfind('\n');
    const std::size_t keep = nl == std::string::npos ? 0 : nl + 1;
    in.close();
    if (keep < text.size()) fs::resize_file(timings, keep);
  }

  struct Todo {
    int trial;
    std::vector<Method> methods;
  };
  std::vector<Todo> todo;
  RunSummary summary;
  for (int t = 0; t < cfg.trials; ++t) {
    Todo item{t, {}};
    for (auto m : cfg.methods)
      if (!done.count(row_key(source.name, t, m))) item.methods.push_back(m);
    if (item.methods.empty())
      ++summary.trials_skipped;
    else
      todo.push_back(std::move(item));
  }
  if (max_new_trials >= 0 && static_cast<int>(todo.size()) > max_new_trials) todo.resize(static_cast<std::size_t>(max_new_trials));

  std::vector<std::optional<std::vector<ResultRow>>> finished(todo.size());
  std::size_t next_write = 0;
  std::mutex mutex;
  std::ofstream out(results, std::ios::app | std::ios::binary);
  std::ofstream tout(timings, std::ios::app | std::ios::binary);
  if (!out || !tout) throw Error(ErrorCode::ParseError, "cannot open result files in " + cfg.out.string());

  auto flush_ready = [&] {
    while (next_write < finished.size() && finished[next_write]) {
      for (const auto& r : *finished[next_write]) {
        out << row_to_json(r).dump() << '\n';
        tout << nlohmann::json{{"key", row_key(r.dataset, r.trial, r.result.method)}, {"seconds", r.result.seconds}}.dump()
             << '\n';
        ++summary.rows_written;
        if (r.result.error) ++summary.error_rows;
      }
      out.flush();
      tout.flush();
      finished[next_write].reset();
      finished[next_write].emplace();  // keep slot marked done, release memory
      ++next_write;
    }
  };

  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= todo.size()) return;
      const auto& item = todo[k];
      const std::uint64_t tseed = derive_seed(cfg.seed, kTrialStream + static_cast<std::uint64_t>(item.trial));
      std::vector<ResultRow> rows;
      try {
        auto [data, graph] = source.load(item.trial);
        for (auto& res : run_trial(data, graph, item.methods, effective.pipeline, tseed))
          rows.push_back({source.name, item.trial, tseed, std::move(res)});
      } catch (const Error& e) {
        for (auto m : item.methods) {
          MethodResult res;
          res.method = m;
          res.acc_u = res.acc_t = res.delta_u = res.delta_t = std::numeric_limits<double>::quiet_NaN();
          res.error = e.code();
          res.message = e.what();
          rows.push_back({source.name, item.trial, tseed, std::move(res)});
        }
      }
      std::lock_guard lock(mutex);
      finished[k] = std::move(rows);
      flush_ready();
      log::info(source.name + " trial " + std::to_string(item.trial) + " done");
    }
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < jobs; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  summary.trials_run = static_cast<int>(todo.size());
  return summary;
}

double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(s.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyResults, "no result rows to summarize");
  std::map<std::pair<std::string, int>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{r.dataset, static_cast<int>(r.result.method)}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    s.dataset = key.first;
    s.method = static_cast<Method>(key.second);
    std::vector<double> deltas;
    double acc = 0.0;
    for (const auto* r : members) {
      if (r->result.error || !std::isfinite(r->result.delta_u)) {
        ++s.errors;
        continue;
      }
      deltas.push_back(r->result.delta_u);
      acc += r->result.acc_u;
    }
    s.n = static_cast<int>(deltas.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (s.n == 0) {
      s.mean = s.stddev = s.min = s.q1 = s.median = s.q3 = s.max = s.mean_acc = nan;
    } else {
      double sum = 0.0;
      for (double d : deltas) sum += d;
      s.mean = sum / s.n;
      double ss = 0.0;
      for (double d : deltas) ss += (d - s.mean) * (d - s.mean);
      s.stddev = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
      std::sort(deltas.begin(), deltas.end());
      s.min = deltas.front();
      s.q1 = quantile_sorted(deltas, 0.25);
      s.median = quantile_sorted(deltas, 0.5);
      s.q3 = quantile_sorted(deltas, 0.75);
      s.max = deltas.back();
      s.mean_acc = acc / s.n;
    }
    out.push_back(s);
  }
  return out;
}

std::string mean_pm_std(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f \xC2\xB1 %.3f", mean, sd);
  return buf;
}

void write_report(const std::vector<ResultRow>& rows, const fs::path& dir) {
  const auto summary = summarize(rows);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "dataset,method,n,errors,mean_delta,std_delta,min,q1,median,q3,max,mean_acc_u,summary\n";
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : summary) {
    const std::string method(to_string(s.method));
    csv << s.dataset << ',' << method << ',' << s.n << ',' << s.errors << ',' << num(s.mean) << ',' << num(s.stddev)
        << ',' << num(s.min) << ',' << num(s.q1) << ',' << num(s.median) << ',' << num(s.q3) << ',' << num(s.max) << ','
        << num(s.mean_acc) << ',' << (s.n ? mean_pm_std(s.mean, s.stddev) : "-") << '\n';
    js.push_back({{"dataset", s.dataset},
                  {"method", method},
                  {"n", s.n},
                  {"errors", s.errors},
                  {"mean", num_or_null(s.mean)},
                  {"std", num_or_null(s.stddev)},
                  {"five_number",
                   {num_or_null(s.min), num_or_null(s.q1), num_or_null(s.median), num_or_null(s.q3), num_or_null(s.max)}},
                  {"mean_acc_u", num_or_null(s.mean_acc)},
                  {"summary", s.n ? mean_pm_std(s.mean, s.stddev) : "-"}});
  }
  std::vector<const ResultRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const ResultRow* a, const ResultRow* b) {
    return std::tie(a->dataset, a->result.method, a->trial) < std::tie(b->dataset, b->result.method, b->trial);
  });
  std::ostringstream deltas;
  deltas << "dataset,method,trial,acc_u,delta_u,delta_t,error\n";
  for (const auto* r : sorted)
    deltas << r->dataset << ',' << to_string(r->result.method) << ',' << r->trial << ',' << num(r->result.acc_u) << ','
           << num(r->result.delta_u) << ',' << num(r->result.delta_t) << ','
           << (r->result.error ? std::string(to_string(*r->result.error)) : "") << '\n';

  auto write = [&](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::ParseError, "cannot write " + p.string());
    f << text;
  };
  write(dir / "summary.csv", csv.str());
  write(dir / "summary.json", js.dump(2) + "\n");
  write(dir / "deltas.csv", deltas.str());
}

}  // namespace cssl
