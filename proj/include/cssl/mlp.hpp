#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cssl/diff.hpp"

namespace cssl {

/// Dense layer: y = W x + b, with W shaped (out x in).
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Multilayer perceptron: ReLU on hidden layers, identity on the output layer.
/// Gradients share this type (one entry per parameter).
struct MlpParams {
  std::vector<DenseLayer> layers;

  [[nodiscard]] Eigen::Index input_dim() const { return layers.front().weight.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return layers.back().weight.rows(); }
  [[nodiscard]] std::vector<int> dims() const;
  [[nodiscard]] bool all_finite() const;
};

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
/// Throws Error{InvalidDims} for fewer than two dims or a non-positive dim.
MlpParams mlp_init(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Plain forward pass on a row batch (n x in) -> (n x out). Throws Error{ShapeMismatch}.
Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& batch);

/// Network parameters registered on a tape.
struct MlpVars {
  std::vector<diff::Var> weights;
  std::vector<diff::Var> biases;
};

MlpVars bind(diff::Tape& tape, const MlpParams& p);
diff::Var mlp_forward(const MlpVars& net, const diff::Var& batch);
/// Collects adjoints after Tape::backward().
MlpParams gradients(const MlpVars& net);

/// Adam moment accumulators.
struct OptState {
  std::vector<DenseLayer> first;
  std::vector<DenseLayer> second;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptState make_opt_state(const MlpParams& p, double learning_rate = 1e-3);

/// One bias-corrected Adam update, in place. Throws Error{ShapeMismatch}.
void opt_step(MlpParams& p, const MlpParams& grads, OptState& s);

/// Checkpoint: {"format":"cssl-mlp","version":1,"layers":[{"rows","cols","weight":[row-major],"bias":[]}]}.
nlohmann::json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);

inline constexpr int kMlpCheckpointVersion = 1;

}  // namespace cssl
