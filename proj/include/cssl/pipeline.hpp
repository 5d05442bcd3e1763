#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cssl/causal_graph.hpp"
#include "cssl/dataset.hpp"
#include "cssl/error.hpp"
#include "cssl/mlp.hpp"
#include "cssl/scm.hpp"

namespace cssl {

enum class Method { P_SUP, F_SUP, CGAN_SSL, GCGAN_SSL, ENT_MIN };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);  // accepts "CGAN_SSL" and "CGAN-SSL"; throws InvalidConfig
std::vector<Method> all_methods();

struct ClassifierConfig {
  std::vector<int> hidden{100, 100};
  int max_epochs = 300;
  int batch_size = 64;
  int patience = 10;
  double learning_rate = 1e-3;
};

struct PipelineConfig {
  ClassifierConfig classifier;
  TrainConfig scm;
  JointOptions joint;
  double entmin_lambda = 0.1;
  Eigen::Index generated_rows = -1;  // |D_G|; -1 means |D_u|
  bool group_roots = false;          // merge root causes and spouses (real-data protocol)
};

struct LabelledSet {
  Eigen::MatrixXd x;
  Eigen::VectorXi y;

  [[nodiscard]] Eigen::Index rows() const { return y.size(); }
};

struct Classifier {
  MlpParams net;

  [[nodiscard]] Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const;
  [[nodiscard]] Eigen::VectorXi predict(const Eigen::MatrixXd& x) const;
};

/// Validation accuracy after every epoch, per phase.
struct TrainHistory {
  std::vector<double> phase1;
  std::vector<double> phase2;
  std::vector<double> loss;  // per step, both phases
};

/// Phase 1 on D_l, then (when `d_g` is given) phase 2 on D_g ∪ D_l. Each phase
/// early-stops on validation accuracy and keeps its best parameters.
/// Throws Error{SingleClassSample}.
Classifier train_classifier(const LabelledSet& d_l, const LabelledSet* d_g, const LabelledSet& d_v,
                            const ClassifierConfig& cfg, std::uint64_t seed, TrainHistory* history = nullptr);

/// BCE on D_l plus lambda times the mean prediction entropy on D_u, same stopping rule.
Classifier train_entmin(const LabelledSet& d_l, const Eigen::MatrixXd& x_u, const LabelledSet& d_v, double lambda,
                        const ClassifierConfig& cfg, std::uint64_t seed, TrainHistory* history = nullptr);

/// Fraction of correct 0.5-threshold predictions. Throws Error{EmptyPartition}.
double evaluate(const Classifier& c, const LabelledSet& part);

using FittedModel = std::variant<std::monostate, CategoricalModel, LabelClassifierModel, GeneratorModel, JointFModel>;

/// One fitted model per plan entry, aligned with `plan.entries`.
struct FittedPlan {
  FactorPlan plan;
  std::vector<FittedModel> models;
};

/// Fit every entry of the plan on the dataset's D_l and D_u partitions.
FittedPlan fit_plan(const FactorPlan& plan, const CausalGraph& g, const Dataset& d, const PipelineConfig& cfg,
                    std::uint64_t seed);

/// Graph-ordered ancestor sampling of n complete rows (features and labels).
/// Throws Error{MissingModel}.
Dataset ancestor_sample(const FittedPlan& fitted, const CausalGraph& g, Eigen::Index n, std::uint64_t seed);

/// Classifier inputs: Markov-blanket features in lexicographic order.
std::vector<std::string> classifier_features(const CausalGraph& g);

struct MethodResult {
  Method method = Method::P_SUP;
  double acc_u = 0.0;
  double acc_t = 0.0;  // NaN without a test partition
  double delta_u = 0.0;
  double delta_t = 0.0;
  double seconds = 0.0;
  std::optional<ErrorCode> error;
  std::string message;
};

/// All requested methods on one trial. P-SUP is always trained as the delta
/// reference; deltas are in percentage points. Failing methods yield rows with
/// `error` set instead of throwing.
std::vector<MethodResult> run_trial(const Dataset& d, const CausalGraph& g, const std::vector<Method>& methods,
                                    const PipelineConfig& cfg, std::uint64_t seed);

/// Accuracies of one method on an already standardized dataset; deltas are left at zero.
MethodResult run_method(Method m, const Dataset& standardized, const CausalGraph& g, const PipelineConfig& cfg,
                        std::uint64_t seed);

nlohmann::json config_to_json(const PipelineConfig& cfg);
/// Overlay of known keys onto `base`; unknown keys throw Error{InvalidConfig}.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

}  // namespace cssl
