#include "cssl/scm.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>

#include "cssl/error.hpp"
#include "cssl/log.hpp"

namespace cssl {

namespace {

// RNG stream ids; shared across trainers so that reduced objectives replay
// the same batches and noise.
enum Stream : std::uint64_t {
  kLabelledBatches = 1,
  kLabelledNoise = 2,
  kUnlabelledBatches = 3,
  kBootstrapLabels = 4,
  kGumbel = 5,
  kUnlabelledNoise = 6,
  kBandwidth = 7,
  kInit = 10,
};

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXi;

/// Endless fixed-size minibatches over n rows; reshuffles on wrap-around.
class BatchCycler {
 public:
  BatchCycler(Index n, Index batch, std::uint64_t seed)
      : perm_(static_cast<std::size_t>(n)), batch_(std::min(batch, n)), rng_(seed) {
    std::iota(perm_.begin(), perm_.end(), Index{0});
    std::shuffle(perm_.begin(), perm_.end(), rng_);
  }

  [[nodiscard]] Index batch() const { return batch_; }

  std::vector<Index> next() {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(batch_));
    while (static_cast<Index>(out.size()) < batch_) {
      if (pos_ == perm_.size()) {
        std::shuffle(perm_.begin(), perm_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(perm_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<Index> perm_;
  std::size_t pos_ = 0;
  Index batch_;
  Rng rng_;
};

MatrixXd take_rows(const MatrixXd& m, const std::vector<Index>& idx) {
  if (m.cols() == 0) return MatrixXd(static_cast<Index>(idx.size()), 0);
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

MatrixXd hcat(std::initializer_list<const MatrixXd*> parts) {
  Index rows = -1, cols = 0;
  for (const auto* p : parts) {
    if (p->cols() == 0) continue;
    if (rows >= 0 && p->rows() != rows) throw Error(ErrorCode::ShapeMismatch, "row counts differ in concatenation");
    rows = p->rows();
    cols += p->cols();
  }
  if (rows < 0) rows = 0;
  MatrixXd out(rows, cols);
  Index at = 0;
  for (const auto* p : parts) {
    if (p->cols() == 0) continue;
    out.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

Index steps_for(Index n, Index batch) { return (n + batch - 1) / batch; }

KernelSpec bandwidth_for(const MatrixXd& real, const TrainConfig& cfg, std::uint64_t salt) {
  if (real.rows() < 2) throw Error(ErrorCode::TooFewSamples, "bandwidth needs at least two real rows");
  return KernelSpec(median_bandwidth(real, cfg.bandwidth_rows, derive_seed(cfg.seed, kBandwidth + 100 * salt)));
}

void check_rows(const MatrixXd& a, Index n, const char* what) {
  if (a.cols() > 0 && a.rows() != n)
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " row count differs from target");
}

}  // namespace

bool CategoricalModel::degenerate() const {
  return std::any_of(probs.begin(), probs.end(), [](double p) { return p == 0.0; });
}

Eigen::VectorXd LabelClassifierModel::predict_proba(const MatrixXd& parents) const {
  const MatrixXd z = mlp_forward(net, parents);
  return z.col(0).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

MatrixXd GeneratorModel::generate(const MatrixXd& noise, const MatrixXd& labels_onehot, const MatrixXd& parents) const {
  if (noise.cols() != noise_dim) throw Error(ErrorCode::SignatureMismatch, "noise width");
  if (labels_onehot.cols() != label_classes)
    throw Error(ErrorCode::SignatureMismatch, "label conditioning has " + std::to_string(labels_onehot.cols()) +
                                                  " columns, model expects " + std::to_string(label_classes));
  if (parents.cols() != parent_dim)
    throw Error(ErrorCode::SignatureMismatch, "parent conditioning has " + std::to_string(parents.cols()) +
                                                  " columns, model expects " + std::to_string(parent_dim));
  if ((label_classes > 0 && labels_onehot.rows() != noise.rows()) || (parent_dim > 0 && parents.rows() != noise.rows()))
    throw Error(ErrorCode::SignatureMismatch, "conditioning row count differs from noise rows");
  return mlp_forward(net, hcat({&noise, &labels_onehot, &parents}));
}

MatrixXd one_hot(const VectorXi& labels, int classes) {
  MatrixXd out = MatrixXd::Zero(labels.size(), classes);
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels(i) < 0 || labels(i) >= classes) throw Error(ErrorCode::ShapeMismatch, "label out of range");
    out(i, labels(i)) = 1.0;
  }
  return out;
}

CategoricalModel fit_A(const VectorXi& labels, int classes) {
  if (labels.size() == 0) throw Error(ErrorCode::EmptySample, "fit_A needs at least one label");
  if (classes < 2) throw Error(ErrorCode::InvalidConfig, "need at least two classes");
  CategoricalModel m;
  m.probs.assign(static_cast<std::size_t>(classes), 0.0);
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels(i) < 0 || labels(i) >= classes) throw Error(ErrorCode::ShapeMismatch, "label out of range");
    m.probs[static_cast<std::size_t>(labels(i))] += 1.0;
  }
  for (auto& p : m.probs) p /= static_cast<double>(labels.size());
  if (m.degenerate()) log::warn("categorical label model has a class with zero probability");
  return m;
}

LabelClassifierModel fit_B(const MatrixXd& parents, const VectorXi& labels, const TrainConfig& cfg, FitTrace* trace) {
  if (parents.rows() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "parents/labels row mismatch");
  if (labels.size() < 2 || labels.minCoeff() == labels.maxCoeff())
    throw Error(ErrorCode::SingleClassSample, "label classifier needs both classes");
  LabelClassifierModel m;
  m.net = mlp_init({static_cast<int>(parents.cols()), cfg.hidden, cfg.hidden, 1}, derive_seed(cfg.seed, kInit));
  auto opt = make_opt_state(m.net, cfg.learning_rate);
  BatchCycler batches(labels.size(), cfg.batch_size, derive_seed(cfg.seed, kLabelledBatches));
  const MatrixXd targets = labels.cast<double>();
  const Index steps = steps_for(labels.size(), batches.batch());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index s = 0; s < steps; ++s) {
      const auto idx = batches.next();
      diff::Tape tape;
      auto net = bind(tape, m.net);
      auto loss = diff::bce_with_logits(mlp_forward(net, tape.constant(take_rows(parents, idx))), take_rows(targets, idx));
      tape.backward(loss);
      opt_step(m.net, gradients(net), opt);
      if (trace) trace->bce.push_back(loss.scalar());
    }
  }
  return m;
}

GeneratorModel init_generator(int output_dim, int label_classes, int parent_dim, int hidden, std::uint64_t seed) {
  GeneratorModel g;
  g.noise_dim = output_dim;
  g.label_classes = label_classes;
  g.parent_dim = parent_dim;
  g.output_dim = output_dim;
  g.net = mlp_init({output_dim + label_classes + parent_dim, hidden, hidden, output_dim}, seed);
  return g;
}

GeneratorModel fit_C(const MatrixXd& samples, const TrainConfig& cfg, FitTrace* trace) {
  if (samples.rows() < 2) throw Error(ErrorCode::TooFewSamples, "fit_C needs at least two samples");
  return fit_D(samples, MatrixXd(samples.rows(), 0), cfg, trace);
}

GeneratorModel fit_D(const MatrixXd& target, const MatrixXd& parents, const TrainConfig& cfg, FitTrace* trace) {
  if (target.rows() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two paired observations");
  check_rows(parents, target.rows(), "parents");
  const MatrixXd real_all = hcat({&target, &parents});
  const KernelSpec spec = bandwidth_for(real_all, cfg, 0);
  auto gen = init_generator(static_cast<int>(target.cols()), 0, static_cast<int>(parents.cols()), cfg.hidden,
                            derive_seed(cfg.seed, kInit));
  auto opt = make_opt_state(gen.net, cfg.learning_rate);
  BatchCycler batches(target.rows(), cfg.batch_size, derive_seed(cfg.seed, kLabelledBatches));
  Rng noise_rng(derive_seed(cfg.seed, kLabelledNoise));
  const Index steps = steps_for(target.rows(), batches.batch());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index s = 0; s < steps; ++s) {
      const auto idx = batches.next();
      const MatrixXd par = take_rows(parents, idx);
      const MatrixXd noise = standard_normal(static_cast<Index>(idx.size()), gen.noise_dim, noise_rng);
      diff::Tape tape;
      auto net = bind(tape, gen.net);
      auto out = mlp_forward(net, tape.constant(hcat({&noise, &par})));
      auto fake = par.cols() > 0 ? diff::concat_cols({out, tape.constant(par)}) : out;
      auto loss = mmd2(fake, tape.constant(take_rows(real_all, idx)), spec);
      tape.backward(loss);
      opt_step(gen.net, gradients(net), opt);
      if (trace) trace->labelled.push_back(loss.scalar());
    }
  }
  return gen;
}

namespace {

struct LabelledObjective {
  const LabelledBlock* block;
  MatrixXd real;  // [target | onehot | parents]
  MatrixXd onehot;
  KernelSpec spec;
};

LabelledObjective make_labelled_objective(const LabelledBlock& l, int classes, const TrainConfig& cfg,
                                          std::uint64_t salt) {
  MatrixXd oh = one_hot(l.labels, classes);
  MatrixXd real = hcat({&l.target, &oh, &l.parents});
  KernelSpec spec = bandwidth_for(real, cfg, salt);
  return {&l, std::move(real), std::move(oh), spec};
}

// MMD between real [x | onehot | parents] and [f(N, onehot, parents) | onehot | parents] on a batch.
diff::Var labelled_mmd(diff::Tape& tape, const MlpVars& net, const GeneratorModel& gen, const LabelledObjective& obj,
                       const std::vector<Index>& idx, Rng& noise_rng) {
  const MatrixXd oh = take_rows(obj.onehot, idx);
  const MatrixXd par = take_rows(obj.block->parents, idx);
  const MatrixXd noise = standard_normal(static_cast<Index>(idx.size()), gen.noise_dim, noise_rng);
  auto out = mlp_forward(net, tape.constant(hcat({&noise, &oh, &par})));
  auto fake = diff::concat_cols({out, tape.constant(hcat({&oh, &par}))});
  return mmd2(fake, tape.constant(take_rows(obj.real, idx)), obj.spec);
}

}  // namespace

GeneratorModel fit_E(const LabelledBlock& labelled, const UnlabelledBlock& unlabelled, const VectorXi& label_pool,
                     const TrainConfig& cfg, FitTrace* trace) {
  if (labelled.target.rows() == 0) throw Error(ErrorCode::EmptyLabelled, "fit_E needs labelled rows");
  if (labelled.labels.size() != labelled.target.rows())
    throw Error(ErrorCode::ShapeMismatch, "labelled target/labels row mismatch");
  check_rows(labelled.parents, labelled.target.rows(), "labelled parents");
  check_rows(unlabelled.parents, unlabelled.target.rows(), "unlabelled parents");
  if (unlabelled.target.rows() > 0 && unlabelled.target.cols() != labelled.target.cols())
    throw Error(ErrorCode::DimMismatch, "labelled/unlabelled target widths differ");
  const int classes = 2;
  const bool use_unlabelled = unlabelled.target.rows() > 0;
  if (use_unlabelled && label_pool.size() == 0) throw Error(ErrorCode::EmptyLabelled, "empty bootstrap label pool");

  const auto lobj = make_labelled_objective(labelled, classes, cfg, 1);
  auto gen = init_generator(static_cast<int>(labelled.target.cols()), classes,
                            static_cast<int>(labelled.parents.cols()), cfg.hidden, derive_seed(cfg.seed, kInit));
  auto opt = make_opt_state(gen.net, cfg.learning_rate);
  BatchCycler lbatches(labelled.target.rows(), cfg.batch_size, derive_seed(cfg.seed, kLabelledBatches));
  Rng lnoise(derive_seed(cfg.seed, kLabelledNoise));

  // Unlabelled objective: real [x | parents] over D_l and D_u together for the bandwidth.
  MatrixXd ureal;
  std::optional<KernelSpec> uspec;
  std::optional<BatchCycler> ubatches;
  Rng unoise(derive_seed(cfg.seed, kUnlabelledNoise));
  Rng boot(derive_seed(cfg.seed, kBootstrapLabels));
  if (use_unlabelled) {
    ureal = hcat({&unlabelled.target, &unlabelled.parents});
    const MatrixXd lreal = hcat({&labelled.target, &labelled.parents});
    MatrixXd joined(ureal.rows() + lreal.rows(), ureal.cols());
    joined << lreal, ureal;
    uspec = bandwidth_for(joined, cfg, 2);
    ubatches.emplace(ureal.rows(), cfg.batch_size, derive_seed(cfg.seed, kUnlabelledBatches));
  }
  const Index steps = use_unlabelled ? steps_for(ureal.rows(), ubatches->batch())
                                     : steps_for(labelled.target.rows(), lbatches.batch());
  std::uniform_int_distribution<Index> pick(0, std::max<Index>(label_pool.size() - 1, 0));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index s = 0; s < steps; ++s) {
      {
        diff::Tape tape;
        auto net = bind(tape, gen.net);
        auto loss = labelled_mmd(tape, net, gen, lobj, lbatches.next(), lnoise);
        tape.backward(loss);
        opt_step(gen.net, gradients(net), opt);
        if (trace) trace->labelled.push_back(loss.scalar());
      }
      if (!use_unlabelled) continue;
      const auto idx = ubatches->next();
      const auto b = static_cast<Index>(idx.size());
      VectorXi ystar(b);
      for (Index i = 0; i < b; ++i) ystar(i) = label_pool(pick(boot));
      const MatrixXd oh = one_hot(ystar, classes);
      const MatrixXd par = take_rows(unlabelled.parents, idx);
      const MatrixXd noise = standard_normal(b, gen.noise_dim, unoise);
      diff::Tape tape;
      auto net = bind(tape, gen.net);
      auto out = mlp_forward(net, tape.constant(hcat({&noise, &oh, &par})));
      auto fake = par.cols() > 0 ? diff::concat_cols({out, tape.constant(par)}) : out;
      auto loss = mmd2(fake, tape.constant(take_rows(ureal, idx)), *uspec);
      tape.backward(loss);
      opt_step(gen.net, gradients(net), opt);
      if (trace) trace->unlabelled.push_back(loss.scalar());
    }
  }
  return gen;
}

MatrixXd gumbel_noise(Index rows, Index cols, Rng& rng) {
  // Open interval (0,1) so that both logs stay finite.
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  MatrixXd g(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      double v = u(rng);
      while (v >= 1.0) v = u(rng);
      g(i, j) = -std::log(-std::log(v));
    }
  return g;
}

VectorXi gumbel_argmax(const MatrixXd& logits, Rng& rng) {
  const MatrixXd perturbed = logits + gumbel_noise(logits.rows(), logits.cols(), rng);
  VectorXi out(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    Index k = 0;
    perturbed.row(i).maxCoeff(&k);
    out(i) = static_cast<int>(k);
  }
  return out;
}

JointFModel fit_F(const JointData& data, const LabelClassifierModel& label_init,
                  const std::vector<GeneratorModel>& effect_init, const JointOptions& opts, const TrainConfig& cfg,
                  FitTrace* trace) {
  if (data.effects.empty()) throw Error(ErrorCode::MissingBEPair, "joint unit needs at least one label child");
  if (data.label_parents_labelled.cols() == 0)
    throw Error(ErrorCode::MissingBEPair, "joint unit needs label parents");
  if (effect_init.size() != data.effects.size())
    throw Error(ErrorCode::ShapeMismatch, "one initial generator per label child required");
  const VectorXi& labels = data.labels;
  const Index nl = labels.size();
  if (nl < 2 || labels.minCoeff() == labels.maxCoeff())
    throw Error(ErrorCode::SingleClassSample, "joint label model needs both classes");
  if (data.label_parents_labelled.rows() != nl) throw Error(ErrorCode::ShapeMismatch, "label parents rows");
  const int classes = 2;
  const Index nu = data.label_parents_unlabelled.rows();
  const bool use_unlabelled = nu > 0 && opts.unlabelled_weight != 0.0;

  JointFModel model{label_init, effect_init, opts.tau};
  auto gopt = make_opt_state(model.label.net, cfg.learning_rate);
  std::vector<OptState> fopt;
  std::vector<LabelledObjective> lobj;
  std::vector<MatrixXd> ureal;
  std::vector<KernelSpec> uspec;
  for (std::size_t k = 0; k < data.effects.size(); ++k) {
    const auto& e = data.effects[k];
    if (e.labelled.target.rows() != nl || e.labelled.labels.size() != nl)
      throw Error(ErrorCode::ShapeMismatch, "label child labelled rows differ from label rows");
    fopt.push_back(make_opt_state(model.effects[k].net, cfg.learning_rate));
    lobj.push_back(make_labelled_objective(e.labelled, classes, cfg, 1 + 10 * k));
    if (use_unlabelled) {
      if (e.unlabelled.target.rows() != nu) throw Error(ErrorCode::ShapeMismatch, "unlabelled rows differ");
      ureal.push_back(hcat({&e.unlabelled.target, &e.context_unlabelled}));
      const MatrixXd lreal = hcat({&e.labelled.target, &e.context_labelled});
      MatrixXd joined(ureal.back().rows() + lreal.rows(), ureal.back().cols());
      joined << lreal, ureal.back();
      uspec.push_back(bandwidth_for(joined, cfg, 2 + 10 * k));
    }
  }
  BatchCycler lbatches(nl, cfg.batch_size, derive_seed(cfg.seed, kLabelledBatches));
  Rng lnoise(derive_seed(cfg.seed, kLabelledNoise));
  std::optional<BatchCycler> ubatches;
  if (use_unlabelled) ubatches.emplace(nu, cfg.batch_size, derive_seed(cfg.seed, kUnlabelledBatches));
  Rng unoise(derive_seed(cfg.seed, kUnlabelledNoise));
  Rng gumbel(derive_seed(cfg.seed, kGumbel));
  const MatrixXd targets = labels.cast<double>();
  const Index steps = use_unlabelled ? steps_for(nu, ubatches->batch()) : steps_for(nl, lbatches.batch());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index s = 0; s < steps; ++s) {
      diff::Tape tape;
      auto gnet = bind(tape, model.label.net);
      std::vector<MlpVars> fnets;
      for (const auto& f : model.effects) fnets.push_back(bind(tape, f.net));

      const auto lidx = lbatches.next();
      auto bce = diff::bce_with_logits(mlp_forward(gnet, tape.constant(take_rows(data.label_parents_labelled, lidx))),
                                       take_rows(targets, lidx));
      diff::Var lmmd;
      for (std::size_t k = 0; k < fnets.size(); ++k) {
        auto term = labelled_mmd(tape, fnets[k], model.effects[k], lobj[k], lidx, lnoise);
        lmmd = k == 0 ? term : lmmd + term;
      }
      diff::Var loss = bce + lmmd;
      diff::Var ummd;
      if (use_unlabelled) {
        const auto uidx = ubatches->next();
        const auto b = static_cast<Index>(uidx.size());
        auto z = mlp_forward(gnet, tape.constant(take_rows(data.label_parents_unlabelled, uidx)));
        auto logits = diff::concat_cols({tape.constant(MatrixXd::Zero(b, 1)), z});
        auto yhat = diff::gumbel_straight_through(logits, gumbel_noise(b, classes, gumbel), opts.tau);
        for (std::size_t k = 0; k < fnets.size(); ++k) {
          const auto& e = data.effects[k];
          const MatrixXd par = take_rows(e.unlabelled.parents, uidx);
          const MatrixXd noise = standard_normal(b, model.effects[k].noise_dim, unoise);
          std::vector<diff::Var> in{tape.constant(noise), yhat};
          if (par.cols() > 0) in.push_back(tape.constant(par));
          auto out = mlp_forward(fnets[k], diff::concat_cols(in));
          const MatrixXd ctx = take_rows(e.context_unlabelled, uidx);
          auto fake = ctx.cols() > 0 ? diff::concat_cols({out, tape.constant(ctx)}) : out;
          auto term = mmd2(fake, tape.constant(take_rows(ureal[k], uidx)), uspec[k]);
          ummd = k == 0 ? term : ummd + term;
        }
        loss = loss + opts.unlabelled_weight * ummd;
      }
      tape.backward(loss);
      opt_step(model.label.net, gradients(gnet), gopt);
      for (std::size_t k = 0; k < fnets.size(); ++k) opt_step(model.effects[k].net, gradients(fnets[k]), fopt[k]);
      if (trace) {
        trace->bce.push_back(bce.scalar());
        trace->labelled.push_back(lmmd.scalar());
        if (use_unlabelled) trace->unlabelled.push_back(ummd.scalar());
      }
    }
  }
  return model;
}

VectorXi sample(const CategoricalModel& m, Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::discrete_distribution<int> dist(m.probs.begin(), m.probs.end());
  VectorXi out(n);
  for (Index i = 0; i < n; ++i) out(i) = dist(rng);
  return out;
}

VectorXi sample(const LabelClassifierModel& m, const MatrixXd& parents, std::uint64_t seed) {
  if (parents.cols() != m.input_dim()) throw Error(ErrorCode::SignatureMismatch, "label model parent width");
  const Eigen::VectorXd p = m.predict_proba(parents);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXi out(p.size());
  for (Index i = 0; i < p.size(); ++i) out(i) = u(rng) < p(i) ? 1 : 0;
  return out;
}

MatrixXd sample(const GeneratorModel& m, const VectorXi* labels, const MatrixXd& parents, Index n,
                std::uint64_t seed) {
  if ((m.label_classes > 0) != (labels != nullptr))
    throw Error(ErrorCode::SignatureMismatch, "label conditioning presence differs from model");
  if (labels && labels->size() != n) throw Error(ErrorCode::SignatureMismatch, "label count differs from n");
  if (parents.cols() != m.parent_dim || (m.parent_dim > 0 && parents.rows() != n))
    throw Error(ErrorCode::SignatureMismatch, "parent conditioning shape differs from model");
  if (n == 0) return MatrixXd(0, m.output_dim);
  Rng rng(seed);
  const MatrixXd noise = standard_normal(n, m.noise_dim, rng);
  const MatrixXd oh = labels ? one_hot(*labels, m.label_classes) : MatrixXd(n, 0);
  return m.generate(noise, oh, m.parent_dim > 0 ? parents : MatrixXd(n, 0));
}

nlohmann::json to_json(const CategoricalModel& m) { return {{"scenario", "A"}, {"probs", m.probs}}; }

nlohmann::json to_json(const LabelClassifierModel& m) {
  return {{"scenario", "B"}, {"classes", m.classes}, {"input_dim", m.input_dim()}, {"net", mlp_to_json(m.net)}};
}

nlohmann::json to_json(const GeneratorModel& m, char scenario) {
  return {{"scenario", std::string(1, scenario)}, {"noise_dim", m.noise_dim}, {"label_classes", m.label_classes},
          {"parent_dim", m.parent_dim},           {"output_dim", m.output_dim}, {"net", mlp_to_json(m.net)}};
}

nlohmann::json to_json(const JointFModel& m) {
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& e : m.effects) effects.push_back(to_json(e, 'F'));
  return {{"scenario", "F"}, {"tau", m.tau}, {"label", to_json(m.label)}, {"effects", effects}};
}

CategoricalModel categorical_from_json(const nlohmann::json& j) {
  return CategoricalModel{j.at("probs").get<std::vector<double>>()};
}

LabelClassifierModel classifier_from_json(const nlohmann::json& j) {
  return LabelClassifierModel{mlp_from_json(j.at("net")), j.at("classes").get<int>()};
}

GeneratorModel generator_from_json(const nlohmann::json& j) {
  GeneratorModel g;
  g.net = mlp_from_json(j.at("net"));
  g.noise_dim = j.at("noise_dim").get<int>();
  g.label_classes = j.at("label_classes").get<int>();
  g.parent_dim = j.at("parent_dim").get<int>();
  g.output_dim = j.at("output_dim").get<int>();
  if (g.net.input_dim() != g.noise_dim + g.label_classes + g.parent_dim || g.net.output_dim() != g.output_dim)
    throw Error(ErrorCode::SignatureMismatch, "generator manifest disagrees with checkpoint shape");
  return g;
}

JointFModel joint_from_json(const nlohmann::json& j) {
  JointFModel m;
  m.tau = j.at("tau").get<double>();
  m.label = classifier_from_json(j.at("label"));
  for (const auto& e : j.at("effects")) m.effects.push_back(generator_from_json(e));
  return m;
}

}  // namespace cssl
