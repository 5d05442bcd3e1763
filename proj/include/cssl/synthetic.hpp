#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <json.hpp>

#include "cssl/causal_graph.hpp"
#include "cssl/dataset.hpp"
#include "cssl/random.hpp"

namespace cssl {

enum class BenchmarkGraph { CG1, CG2, CG3, CG4, CG5, CG6, CG7 };

BenchmarkGraph parse_benchmark(std::string_view name);  // throws InvalidConfig
std::string to_string(BenchmarkGraph g);

/// Two-dimensional blocks X_C, X_S, X_E (as present) and the label Y.
CausalGraph benchmark_graph(BenchmarkGraph g);

struct QuadCoeffs {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
};

/// a*x1^2 + b*x2^2 + c*x1 + d*x2 + e*x1*x2 + f.
inline double quad_map(const Eigen::Ref<const Eigen::Vector2d>& x, const QuadCoeffs& q) {
  return q.a * x(0) * x(0) + q.b * x(1) * x(1) + q.c * x(0) + q.d * x(1) + q.e * x(0) * x(1) + q.f;
}

/// y ~ Bernoulli(sigmoid(phi(x) - mean phi)) with the mean taken over the batch.
Eigen::VectorXi label_from_map(const Eigen::MatrixXd& xc, const QuadCoeffs& q, Rng& rng, double* mu_phi = nullptr);

/// diag(w, 1/w) * n + (0, 4 cos(n2 / 2)), plus (0, A) when y = 1.
inline Eigen::Vector2d template_mechanism(const Eigen::Vector2d& n, int y, double A, double w) {
  Eigen::Vector2d out(w * n(0), n(1) / w + 4.0 * std::cos(n(1) / 2.0));
  if (y == 1) out(1) += A;
  return out;
}

struct SynthConfig {
  BenchmarkGraph graph = BenchmarkGraph::CG1;
  std::uint64_t seed = 0;
  PartitionSizes sizes;
  double balance_lo = 0.45;
  double balance_hi = 0.55;
  int max_retries = 1000;
};

/// Per-instance draws; every field is drawn regardless of graph.
struct SynthParams {
  double s = 0, t = 0, w = 0;
  QuadCoeffs quad;
  double mu_phi = 0;
  double offset = 0;  // A fed to the template mechanism
  int attempts = 0;   // draws used, including the accepted one
};

struct SynthInstance {
  CausalGraph graph;
  Dataset data;
  SynthParams params;
};

/// Instance with balance rejection over fresh parameter draws.
/// Throws Error{BalanceRejectionExhausted}.
SynthInstance generate(const SynthConfig& cfg);

nlohmann::json params_to_json(const SynthParams& p, const SynthConfig& cfg);

/// Writes `<stem>.csv` and `<stem>.params.json` under `dir`.
void write_instance(const SynthInstance& inst, const SynthConfig& cfg, const std::filesystem::path& dir,
                    const std::string& stem);

}  // namespace cssl
