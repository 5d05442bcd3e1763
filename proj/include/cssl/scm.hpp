#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cssl/kernels.hpp"
#include "cssl/mlp.hpp"
#include "cssl/random.hpp"

namespace cssl {

/// Budget shared by every structural-model trainer.
struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int hidden = 50;
  std::uint64_t seed = 0;
  /// Rows used for median-heuristic bandwidths (seeded subsample above this).
  Eigen::Index bandwidth_rows = 2000;
};

/// Per-step losses, appended in training order.
struct FitTrace {
  std::vector<double> labelled;    // MMD on labelled batches (C/D: the only objective)
  std::vector<double> unlabelled;  // MMD on unlabelled batches
  std::vector<double> bce;         // label-model cross entropy
};

/// Scenario A: P(Y) as a categorical distribution.
struct CategoricalModel {
  std::vector<double> probs;

  [[nodiscard]] int classes() const { return static_cast<int>(probs.size()); }
  [[nodiscard]] bool degenerate() const;
};

/// Scenario B: binary P(Y | parents) as a logistic MLP (single logit).
struct LabelClassifierModel {
  MlpParams net;
  int classes = 2;

  [[nodiscard]] Eigen::VectorXd predict_proba(const Eigen::MatrixXd& parents) const;
  [[nodiscard]] Eigen::Index input_dim() const { return net.input_dim(); }
};

/// Scenarios C/D/E: x = f(noise, onehot(y)?, parents?). Input columns are laid
/// out as [noise | onehot label | parent features].
struct GeneratorModel {
  MlpParams net;
  int noise_dim = 0;
  int label_classes = 0;  // 0 when unconditioned on the label
  int parent_dim = 0;
  int output_dim = 0;

  /// `labels_onehot` must have label_classes columns (or be empty when 0);
  /// `parents` must have parent_dim columns. Throws Error{SignatureMismatch}.
  [[nodiscard]] Eigen::MatrixXd generate(const Eigen::MatrixXd& noise, const Eigen::MatrixXd& labels_onehot,
                                         const Eigen::MatrixXd& parents) const;
};

/// Scenario F: label model g and one generator per label child, trained jointly.
struct JointFModel {
  LabelClassifierModel label;
  std::vector<GeneratorModel> effects;
  double tau = 1.0;
};

/// Observed rows for a label-conditioned target.
struct LabelledBlock {
  Eigen::MatrixXd target;
  Eigen::VectorXi labels;
  Eigen::MatrixXd parents;  // feature parents, possibly zero columns
};

struct UnlabelledBlock {
  Eigen::MatrixXd target;
  Eigen::MatrixXd parents;
};

/// One label child inside a scenario-F unit. `context_*` holds the observed
/// non-target features appended to both sides of the unlabelled joint MMD
/// (label parents together with the child's feature parents, deduplicated).
struct JointEffectData {
  LabelledBlock labelled;
  UnlabelledBlock unlabelled;
  Eigen::MatrixXd context_labelled;
  Eigen::MatrixXd context_unlabelled;
};

struct JointData {
  Eigen::MatrixXd label_parents_labelled;
  Eigen::VectorXi labels;
  Eigen::MatrixXd label_parents_unlabelled;
  std::vector<JointEffectData> effects;
};

struct JointOptions {
  double tau = 1.0;
  double unlabelled_weight = 1.0;
};

Eigen::MatrixXd one_hot(const Eigen::VectorXi& labels, int classes);

/// Maximum-likelihood class frequencies. Throws Error{EmptySample}; warns on a
/// zero-probability class.
CategoricalModel fit_A(const Eigen::VectorXi& labels, int classes = 2);

/// Full-batch-capable BCE fit over the labelled pairs for a fixed epoch budget.
/// Throws Error{SingleClassSample}.
LabelClassifierModel fit_B(const Eigen::MatrixXd& parents, const Eigen::VectorXi& labels, const TrainConfig& cfg,
                           FitTrace* trace = nullptr);

/// MMD fit of a root feature from noise. Throws Error{TooFewSamples}.
GeneratorModel fit_C(const Eigen::MatrixXd& samples, const TrainConfig& cfg, FitTrace* trace = nullptr);

/// MMD fit of p(x, parents) against [f(noise, parents), parents]. Throws Error{TooFewSamples}.
GeneratorModel fit_D(const Eigen::MatrixXd& target, const Eigen::MatrixXd& parents, const TrainConfig& cfg,
                     FitTrace* trace = nullptr);

/// Alternating labelled / bootstrapped-label unlabelled MMD fit of a label child.
/// Throws Error{EmptyLabelled}.
GeneratorModel fit_E(const LabelledBlock& labelled, const UnlabelledBlock& unlabelled,
                     const Eigen::VectorXi& label_pool, const TrainConfig& cfg, FitTrace* trace = nullptr);

/// Fresh generator with the conditioning signature of a label child.
GeneratorModel init_generator(int output_dim, int label_classes, int parent_dim, int hidden, std::uint64_t seed);

/// Joint Gumbel-max straight-through fit of g with every effect generator.
/// `effect_init` must align with `data.effects`. Throws Error{MissingBEPair}.
JointFModel fit_F(const JointData& data, const LabelClassifierModel& label_init,
                  const std::vector<GeneratorModel>& effect_init, const JointOptions& opts, const TrainConfig& cfg,
                  FitTrace* trace = nullptr);

/// Standard Gumbel draws -log(-log(U)), U ~ Uniform(0,1).
Eigen::MatrixXd gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Hard Gumbel-max class draws from per-row class logits.
Eigen::VectorXi gumbel_argmax(const Eigen::MatrixXd& logits, Rng& rng);

// Sampling. Deterministic for a fixed seed.
Eigen::VectorXi sample(const CategoricalModel& m, Eigen::Index n, std::uint64_t seed);
Eigen::VectorXi sample(const LabelClassifierModel& m, const Eigen::MatrixXd& parents, std::uint64_t seed);
Eigen::MatrixXd sample(const GeneratorModel& m, const Eigen::VectorXi* labels, const Eigen::MatrixXd& parents,
                       Eigen::Index n, std::uint64_t seed);

// Serialization: a manifest with scenario tag, conditioning signature, noise
// dim and tau, embedding mlp checkpoints.
nlohmann::json to_json(const CategoricalModel& m);
nlohmann::json to_json(const LabelClassifierModel& m);
nlohmann::json to_json(const GeneratorModel& m, char scenario);
nlohmann::json to_json(const JointFModel& m);
CategoricalModel categorical_from_json(const nlohmann::json& j);
LabelClassifierModel classifier_from_json(const nlohmann::json& j);
GeneratorModel generator_from_json(const nlohmann::json& j);
JointFModel joint_from_json(const nlohmann::json& j);

}  // namespace cssl
