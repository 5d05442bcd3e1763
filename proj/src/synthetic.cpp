#include "cssl/synthetic.hpp"

#include <array>
#include <cctype>
#include <fstream>

#include "cssl/dataset_io.hpp"
#include "cssl/error.hpp"

namespace cssl {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

constexpr std::array<std::string_view, 7> kNames{"CG1", "CG2", "CG3", "CG4", "CG5", "CG6", "CG7"};

bool has_cause(BenchmarkGraph g) { return g != BenchmarkGraph::CG2 && g != BenchmarkGraph::CG4; }
bool has_spouse(BenchmarkGraph g) {
  return g == BenchmarkGraph::CG4 || g == BenchmarkGraph::CG6 || g == BenchmarkGraph::CG7;
}
bool has_effect(BenchmarkGraph g) { return g != BenchmarkGraph::CG1; }

// N(0, diag(v, 1/v)) rows.
MatrixXd scaled_normal(Index n, double v, Rng& rng) {
  MatrixXd x = standard_normal(n, 2, rng);
  x.col(0) *= std::sqrt(v);
  x.col(1) /= std::sqrt(v);
  return x;
}

}  // namespace

BenchmarkGraph parse_benchmark(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == upper) return static_cast<BenchmarkGraph>(i);
  throw Error(ErrorCode::InvalidConfig, "unknown benchmark graph " + std::string(name));
}

std::string to_string(BenchmarkGraph g) { return std::string(kNames[static_cast<std::size_t>(g)]); }

CausalGraph benchmark_graph(BenchmarkGraph g) {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  if (has_cause(g)) {
    nodes.push_back({"X_C", NodeKind::Feature, 2, {}});
    edges.emplace_back("X_C", "Y");
  }
  if (has_effect(g)) {
    nodes.push_back({"X_E", NodeKind::Feature, 2, {}});
    edges.emplace_back("Y", "X_E");
  }
  if (has_spouse(g)) {
    nodes.push_back({"X_S", NodeKind::Feature, 2, {}});
    edges.emplace_back("X_S", "X_E");
  }
  if (g == BenchmarkGraph::CG5 || g == BenchmarkGraph::CG6) edges.emplace_back("X_C", "X_E");
  nodes.push_back({"Y", NodeKind::Label, 1, {}});
  return build_graph(std::move(nodes), std::move(edges), "Y");
}

Eigen::VectorXi label_from_map(const MatrixXd& xc, const QuadCoeffs& q, Rng& rng, double* mu_phi) {
  Eigen::VectorXd phi(xc.rows());
  for (Index i = 0; i < xc.rows(); ++i) phi(i) = quad_map(xc.row(i).transpose(), q);
  const double mu = phi.mean();
  if (mu_phi) *mu_phi = mu;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXi y(xc.rows());
  for (Index i = 0; i < xc.rows(); ++i) y(i) = u(rng) < 1.0 / (1.0 + std::exp(-(phi(i) - mu))) ? 1 : 0;
  return y;
}

SynthInstance generate(const SynthConfig& cfg) {
  if (cfg.sizes.labelled <= 0 || cfg.sizes.unlabelled <= 0 || cfg.sizes.validation <= 0 || cfg.sizes.test <= 0)
    throw Error(ErrorCode::InvalidConfig, "synthetic partition sizes must be positive");
  const Index n = cfg.sizes.total();
  const BenchmarkGraph bg = cfg.graph;
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> u01(0.0, 1.0), u12(1.0, 2.0), u46(4.0, 6.0);
    SynthParams p;
    p.s = u12(rng);
    p.t = u12(rng);
    p.w = u46(rng);
    p.quad = {u01(rng), u01(rng), u01(rng), u01(rng), u01(rng), 0.0};
    p.attempts = attempt + 1;

    Dataset d;
    d.name = to_string(bg);
    MatrixXd xc, xs;
    if (has_cause(bg)) {
      xc = scaled_normal(n, p.s, rng);
      d.labels = label_from_map(xc, p.quad, rng, &p.mu_phi);
      d.features["X_C"] = xc;
    } else {
      std::bernoulli_distribution coin(0.5);
      d.labels.resize(n);
      for (Index i = 0; i < n; ++i) d.labels(i) = coin(rng) ? 1 : 0;
    }
    if (has_spouse(bg)) {
      xs = scaled_normal(n, p.t, rng);
      d.features["X_S"] = xs;
    }
    if (has_effect(bg)) {
      switch (bg) {
        case BenchmarkGraph::CG4:
        case BenchmarkGraph::CG7: p.offset = p.t / 2 + p.w / 2; break;
        case BenchmarkGraph::CG5: p.offset = p.s / 2 + p.w / 2; break;
        case BenchmarkGraph::CG6: p.offset = p.s / 2 + p.t / 2 + p.w / 2; break;
        default: p.offset = p.w / 2; break;
      }
      const MatrixXd noise = standard_normal(n, 2, rng);
      MatrixXd xe(n, 2);
      for (Index i = 0; i < n; ++i) xe.row(i) = template_mechanism(noise.row(i).transpose(), d.labels(i), p.offset, p.w);
      if (bg == BenchmarkGraph::CG4 || bg == BenchmarkGraph::CG6) xe += xs;
      if (bg == BenchmarkGraph::CG5 || bg == BenchmarkGraph::CG6) xe += xc;
      d.features["X_E"] = std::move(xe);
    }
    const double rate = d.labels.cast<double>().mean();
    if (rate < cfg.balance_lo || rate > cfg.balance_hi) continue;
    d.partitions = shuffle_partitions(n, cfg.sizes, derive_seed(cfg.seed, 0xFFFF'FFFFULL));
    return {benchmark_graph(bg), std::move(d), p};
  }
  throw Error(ErrorCode::BalanceRejectionExhausted,
              to_string(bg) + ": no balanced instance in " + std::to_string(cfg.max_retries) + " draws");
}

nlohmann::json params_to_json(const SynthParams& p, const SynthConfig& cfg) {
  return {{"graph", to_string(cfg.graph)},
          {"seed", cfg.seed},
          {"s", p.s},
          {"t", p.t},
          {"w", p.w},
          {"a", p.quad.a},
          {"b", p.quad.b},
          {"c", p.quad.c},
          {"d", p.quad.d},
          {"e", p.quad.e},
          {"f", p.quad.f},
          {"mu_phi", p.mu_phi},
          {"offset", p.offset},
          {"attempts", p.attempts},
          {"sizes",
           {{"l", cfg.sizes.labelled}, {"u", cfg.sizes.unlabelled}, {"v", cfg.sizes.validation}, {"t", cfg.sizes.test}}}};
}

void write_instance(const SynthInstance& inst, const SynthConfig& cfg, const std::filesystem::path& dir,
                    const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_dataset_csv(inst.data, inst.graph, dir / (stem + ".csv"));
  std::ofstream f(dir / (stem + ".params.json"));
  if (!f) throw Error(ErrorCode::ParseError, "cannot write " + (dir / (stem + ".params.json")).string());
  f << params_to_json(inst.params, cfg).dump(2) << '\n';
}

}  // namespace cssl
