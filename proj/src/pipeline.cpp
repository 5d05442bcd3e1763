#include "cssl/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "cssl/dataset_io.hpp"
#include "cssl/random.hpp"

namespace cssl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXi;

namespace {

constexpr std::array<std::string_view, 5> kMethodNames{"P_SUP", "F_SUP", "CGAN_SSL", "GCGAN_SSL", "ENT_MIN"};

enum Stream : std::uint64_t {
  kClassifierInit = 1,
  kPhase1Batches = 2,
  kPhase2Batches = 3,
  kEntropyBatches = 5,
  kScmFit = 20,
  kSampling = 21,
  kClassifier = 22,
};

double accuracy(const MlpParams& net, const LabelledSet& part) {
  const MatrixXd z = mlp_forward(net, part.x);
  Index correct = 0;
  for (Index i = 0; i < part.rows(); ++i) correct += ((z(i, 0) > 0.0 ? 1 : 0) == part.y(i));
  return static_cast<double>(correct) / static_cast<double>(part.rows());
}

MatrixXd rows_of(const MatrixXd& m, const std::vector<Index>& idx) {
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<std::vector<Index>> epoch_batches(Index n, Index batch, Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> out;
  for (Index at = 0; at < n; at += batch) {
    const Index end = std::min(n, at + batch);
    out.emplace_back(perm.begin() + at, perm.begin() + end);
  }
  return out;
}

// Optional unlabelled entropy term for ENT-MIN.
struct EntropyTerm {
  const MatrixXd* x_u = nullptr;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

// One early-stopped phase; the kept parameters come from one of its own epochs.
// Ties move the kept parameters forward without resetting patience.
void run_phase(MlpParams& net, const LabelledSet& train, const LabelledSet& val, const ClassifierConfig& cfg,
               std::uint64_t batch_seed, const EntropyTerm* entropy, std::vector<double>* val_hist,
               std::vector<double>* loss_hist) {
  auto opt = make_opt_state(net, cfg.learning_rate);
  Rng rng(batch_seed);
  std::optional<Rng> urng;
  std::vector<std::vector<Index>> ubatches;
  std::size_t upos = 0;
  if (entropy) urng.emplace(entropy->seed);
  const MatrixXd targets = train.y.cast<double>();

  MlpParams best = net;
  double best_acc = -1.0;
  int stale = 0;
  for (int epoch = 0; epoch < cfg.max_epochs && stale < cfg.patience; ++epoch) {
    for (const auto& idx : epoch_batches(train.rows(), cfg.batch_size, rng)) {
      diff::Tape tape;
      auto vars = bind(tape, net);
      auto loss = diff::bce_with_logits(mlp_forward(vars, tape.constant(rows_of(train.x, idx))), rows_of(targets, idx));
      if (entropy) {
        if (upos == ubatches.size()) {
          ubatches = epoch_batches(entropy->x_u->rows(), cfg.batch_size, *urng);
          upos = 0;
        }
        auto ent = diff::mean_binary_entropy(mlp_forward(vars, tape.constant(rows_of(*entropy->x_u, ubatches[upos++]))));
        loss = loss + entropy->lambda * ent;
      }
      tape.backward(loss);
      opt_step(net, gradients(vars), opt);
      if (loss_hist) loss_hist->push_back(loss.scalar());
    }
    const double acc = accuracy(net, val);
    if (val_hist) val_hist->push_back(acc);
    if (acc > best_acc) stale = 0;
    else ++stale;
    if (acc >= best_acc) {
      best_acc = acc;
      best = net;
    }
  }
  net = std::move(best);
}

MlpParams init_classifier(Index input_dim, const ClassifierConfig& cfg, std::uint64_t seed) {
  std::vector<int> dims{static_cast<int>(input_dim)};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);
  return mlp_init(dims, derive_seed(seed, kClassifierInit));
}

void require_both_classes(const LabelledSet& d) {
  if (d.rows() < 2 || d.y.minCoeff() == d.y.maxCoeff())
    throw Error(ErrorCode::SingleClassSample, "classifier training needs both classes in D_l");
}

std::vector<std::string> feature_parents(const Factor& f, const std::string& label) {
  std::vector<std::string> out;
  for (const auto& p : f.parents)
    if (p != label) out.push_back(p);
  return out;
}

std::vector<Index> concat(const std::vector<Index>& a, const std::vector<Index>& b) {
  std::vector<Index> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Seed slot of an entry: position of its first target in graph order, so that
// fitting and sampling do not depend on the entry list order.
std::uint64_t slot_of(const std::vector<std::string>& order, const std::string& id) {
  return static_cast<std::uint64_t>(std::find(order.begin(), order.end(), id) - order.begin());
}

LabelledSet labelled_set(const Dataset& d, const std::vector<std::string>& vars, const std::vector<Index>& idx) {
  return {gather(d, vars, idx), gather_labels(d, idx)};
}

}  // namespace

std::string_view to_string(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

Method parse_method(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '-', '_');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  for (std::size_t i = 0; i < kMethodNames.size(); ++i)
    if (kMethodNames[i] == s) return static_cast<Method>(i);
  throw Error(ErrorCode::InvalidConfig, "unknown method " + std::string(name));
}

std::vector<Method> all_methods() {
  return {Method::P_SUP, Method::F_SUP, Method::CGAN_SSL, Method::GCGAN_SSL, Method::ENT_MIN};
}

Eigen::VectorXd Classifier::predict_proba(const MatrixXd& x) const {
  return mlp_forward(net, x).col(0).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

VectorXi Classifier::predict(const MatrixXd& x) const {
  return (mlp_forward(net, x).col(0).array() > 0.0).cast<int>();
}

Classifier train_classifier(const LabelledSet& d_l, const LabelledSet* d_g, const LabelledSet& d_v,
                            const ClassifierConfig& cfg, std::uint64_t seed, TrainHistory* history) {
  require_both_classes(d_l);
  if (d_v.rows() == 0) throw Error(ErrorCode::EmptyPartition, "validation partition is empty");
  Classifier c{init_classifier(d_l.x.cols(), cfg, seed)};
  run_phase(c.net, d_l, d_v, cfg, derive_seed(seed, kPhase1Batches), nullptr, history ? &history->phase1 : nullptr,
            history ? &history->loss : nullptr);
  if (d_g && d_g->rows() > 0) {
    if (d_g->x.cols() != d_l.x.cols()) throw Error(ErrorCode::DimMismatch, "generated rows have a different width");
    LabelledSet joined{MatrixXd(d_g->rows() + d_l.rows(), d_l.x.cols()), VectorXi(d_g->rows() + d_l.rows())};
    joined.x << d_g->x, d_l.x;
    joined.y << d_g->y, d_l.y;
    run_phase(c.net, joined, d_v, cfg, derive_seed(seed, kPhase2Batches), nullptr,
              history ? &history->phase2 : nullptr, history ? &history->loss : nullptr);
  }
  return c;
}

Classifier train_entmin(const LabelledSet& d_l, const MatrixXd& x_u, const LabelledSet& d_v, double lambda,
                        const ClassifierConfig& cfg, std::uint64_t seed, TrainHistory* history) {
  require_both_classes(d_l);
  if (d_v.rows() == 0) throw Error(ErrorCode::EmptyPartition, "validation partition is empty");
  if (x_u.rows() == 0) throw Error(ErrorCode::EmptyPartition, "unlabelled partition is empty");
  Classifier c{init_classifier(d_l.x.cols(), cfg, seed)};
  EntropyTerm term{&x_u, lambda, derive_seed(seed, kEntropyBatches)};
  run_phase(c.net, d_l, d_v, cfg, derive_seed(seed, kPhase1Batches), &term, history ? &history->phase1 : nullptr,
            history ? &history->loss : nullptr);
  return c;
}

double evaluate(const Classifier& c, const LabelledSet& part) {
  if (part.rows() == 0) throw Error(ErrorCode::EmptyPartition, "cannot evaluate on an empty partition");
  return accuracy(c.net, part);
}

std::vector<std::string> classifier_features(const CausalGraph& g) {
  auto mb = markov_blanket(g);
  return {mb.begin(), mb.end()};
}

FittedPlan fit_plan(const FactorPlan& plan, const CausalGraph& g, const Dataset& d, const PipelineConfig& cfg,
                    std::uint64_t seed) {
  const auto& L = d.partitions.labelled;
  const auto& U = d.partitions.unlabelled;
  const auto LU = concat(L, U);
  const auto order = topological_order(g);
  const std::string& label = g.label();
  const VectorXi yl = gather_labels(d, L);

  FittedPlan out{plan, {}};
  for (const auto& entry : plan.entries) {
    TrainConfig tc = cfg.scm;
    tc.seed = derive_seed(seed, slot_of(order, entry.factors.front().target));
    const Factor& f = entry.factors.front();
    switch (entry.scenario) {
      case Scenario::A: out.models.emplace_back(fit_A(yl)); break;
      case Scenario::B: out.models.emplace_back(fit_B(gather(d, f.parents, L), yl, tc)); break;
      case Scenario::C: out.models.emplace_back(fit_C(gather(d, entry.targets(), LU), tc)); break;
      case Scenario::D: out.models.emplace_back(fit_D(gather(d, {f.target}, LU), gather(d, f.parents, LU), tc)); break;
      case Scenario::E: {
        const auto fp = feature_parents(f, label);
        LabelledBlock lb{gather(d, {f.target}, L), yl, gather(d, fp, L)};
        UnlabelledBlock ub{gather(d, {f.target}, U), gather(d, fp, U)};
        out.models.emplace_back(fit_E(lb, ub, yl, tc));
        break;
      }
      case Scenario::F: {
        const Factor& lf = entry.factors.front();
        JointData jd;
        jd.label_parents_labelled = gather(d, lf.parents, L);
        jd.labels = yl;
        jd.label_parents_unlabelled = gather(d, lf.parents, U);
        std::vector<GeneratorModel> inits;
        for (std::size_t k = 1; k < entry.factors.size(); ++k) {
          const Factor& ef = entry.factors[k];
          const auto fp = feature_parents(ef, label);
          std::set<std::string> ctx(lf.parents.begin(), lf.parents.end());
          ctx.insert(fp.begin(), fp.end());
          const std::vector<std::string> context(ctx.begin(), ctx.end());
          JointEffectData e;
          e.labelled = {gather(d, {ef.target}, L), yl, gather(d, fp, L)};
          e.unlabelled = {gather(d, {ef.target}, U), gather(d, fp, U)};
          e.context_labelled = gather(d, context, L);
          e.context_unlabelled = gather(d, context, U);
          jd.effects.push_back(std::move(e));
          inits.push_back(init_generator(g.node(ef.target).dim, 2, static_cast<int>(jd.effects.back().labelled.parents.cols()),
                                         tc.hidden, derive_seed(tc.seed, 100 + k)));
        }
        auto g_init = fit_B(jd.label_parents_labelled, yl, tc);
        out.models.emplace_back(fit_F(jd, g_init, inits, cfg.joint, tc));
        break;
      }
    }
  }
  return out;
}

Dataset ancestor_sample(const FittedPlan& fitted, const CausalGraph& g, Index n, std::uint64_t seed) {
  if (fitted.models.size() != fitted.plan.entries.size())
    throw Error(ErrorCode::MissingModel, "fitted model count differs from plan entries");
  const auto order = topological_order(g);
  const std::string& label = g.label();
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  Dataset out;
  out.name = "generated";
  out.labels = VectorXi::Zero(n);

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& id = order[pos];
    if (out.features.count(id)) continue;  // emitted with a merged root block
    const auto* entry = fitted.plan.entry_for(id);
    if (!entry) throw Error(ErrorCode::MissingModel, "no plan entry covers " + id);
    const auto& model = fitted.models[static_cast<std::size_t>(entry - fitted.plan.entries.data())];
    if (std::holds_alternative<std::monostate>(model))
      throw Error(ErrorCode::MissingModel, "plan entry for " + id + " has no fitted model");
    const std::uint64_t s = derive_seed(seed, pos);
    const auto factor = std::find_if(entry->factors.begin(), entry->factors.end(),
                                     [&](const Factor& f) { return f.target == id; });

    if (id == label) {
      if (const auto* cat = std::get_if<CategoricalModel>(&model))
        out.labels = sample(*cat, n, s);
      else if (const auto* clf = std::get_if<LabelClassifierModel>(&model))
        out.labels = sample(*clf, gather(out, factor->parents, all), s);
      else if (const auto* joint = std::get_if<JointFModel>(&model))
        out.labels = sample(joint->label, gather(out, factor->parents, all), s);
      else
        throw Error(ErrorCode::MissingModel, "label entry holds a feature model");
      continue;
    }

    const GeneratorModel* gen = std::get_if<GeneratorModel>(&model);
    if (const auto* joint = std::get_if<JointFModel>(&model))
      gen = &joint->effects.at(static_cast<std::size_t>(factor - entry->factors.begin()) - 1);
    if (!gen) throw Error(ErrorCode::MissingModel, "feature entry holds a label model");

    const auto fp = feature_parents(*factor, label);
    const bool on_label = std::find(factor->parents.begin(), factor->parents.end(), label) != factor->parents.end();
    const MatrixXd parents = fp.empty() ? MatrixXd(n, 0) : gather(out, fp, all);
    const MatrixXd values = sample(*gen, on_label ? &out.labels : nullptr, parents, n, s);
    if (entry->scenario == Scenario::C && entry->factors.size() > 1) {
      Index at = 0;
      for (const auto& f : entry->factors) {
        const int dim = g.node(f.target).dim;
        out.features[f.target] = values.middleCols(at, dim);
        at += dim;
      }
    } else {
      out.features[id] = values;
    }
  }
  return out;
}

MethodResult run_method(Method m, const Dataset& d, const CausalGraph& g, const PipelineConfig& cfg,
                        std::uint64_t seed) {
  MethodResult r;
  r.method = m;
  const auto start = std::chrono::steady_clock::now();
  const auto vars = classifier_features(g);
  const auto dl = labelled_set(d, vars, d.partitions.labelled);
  const auto du = labelled_set(d, vars, d.partitions.unlabelled);
  const auto dv = labelled_set(d, vars, d.partitions.validation);
  const std::uint64_t cseed = derive_seed(seed, kClassifier);

  Classifier c;
  switch (m) {
    case Method::P_SUP: c = train_classifier(dl, nullptr, dv, cfg.classifier, cseed); break;
    case Method::F_SUP: c = train_classifier(dl, &du, dv, cfg.classifier, cseed); break;
    case Method::ENT_MIN: c = train_entmin(dl, du.x, dv, cfg.entmin_lambda, cfg.classifier, cseed); break;
    case Method::CGAN_SSL:
    case Method::GCGAN_SSL: {
      FactorPlan plan = m == Method::CGAN_SSL ? classify_disjoint(g) : classify_joint(g);
      if (m == Method::GCGAN_SSL && !plan.has_scenario(Scenario::F))
        throw Error(ErrorCode::JointModeUnavailable, "graph has no label-parent/label-child pair");
      if (cfg.group_roots) plan = group_joint_roots(plan, g);
      const auto fitted = fit_plan(plan, g, d, cfg, derive_seed(seed, kScmFit));
      const Index n = cfg.generated_rows >= 0 ? cfg.generated_rows : du.rows();
      const Dataset gen = ancestor_sample(fitted, g, n, derive_seed(seed, kSampling));
      std::vector<Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), Index{0});
      const LabelledSet dg{gather(gen, vars, all), gen.labels};
      c = train_classifier(dl, &dg, dv, cfg.classifier, cseed);
      break;
    }
  }
  r.acc_u = evaluate(c, du);
  r.acc_t = d.partitions.test.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : evaluate(c, labelled_set(d, vars, d.partitions.test));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<MethodResult> run_trial(const Dataset& raw, const CausalGraph& g, const std::vector<Method>& methods,
                                    const PipelineConfig& cfg, std::uint64_t seed) {
  std::vector<MethodResult> rows;
  auto failed = [](Method m, const Error& e) {
    MethodResult r;
    r.method = m;
    r.acc_u = r.acc_t = r.delta_u = r.delta_t = std::numeric_limits<double>::quiet_NaN();
    r.error = e.code();
    r.message = e.what();
    return r;
  };
  Dataset d;
  MethodResult ref;
  try {
    d = standardize(raw);
    ref = run_method(Method::P_SUP, d, g, cfg, seed);
  } catch (const Error& e) {
    for (auto m : methods) rows.push_back(failed(m, e));
    return rows;
  }
  for (auto m : methods) {
    MethodResult r;
    if (m == Method::P_SUP) {
      r = ref;
    } else {
      try {
        r = run_method(m, d, g, cfg, seed);
      } catch (const Error& e) {
        rows.push_back(failed(m, e));
        continue;
      }
    }
    r.delta_u = 100.0 * (r.acc_u - ref.acc_u);
    r.delta_t = 100.0 * (r.acc_t - ref.acc_t);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  return {{"classifier",
           {{"hidden", c.classifier.hidden},
            {"max_epochs", c.classifier.max_epochs},
            {"batch_size", c.classifier.batch_size},
            {"patience", c.classifier.patience},
            {"learning_rate", c.classifier.learning_rate}}},
          {"scm",
           {{"epochs", c.scm.epochs},
            {"batch_size", c.scm.batch_size},
            {"learning_rate", c.scm.learning_rate},
            {"hidden", c.scm.hidden},
            {"bandwidth_rows", c.scm.bandwidth_rows}}},
          {"joint", {{"tau", c.joint.tau}, {"unlabelled_weight", c.joint.unlabelled_weight}}},
          {"entmin_lambda", c.entmin_lambda},
          {"generated_rows", c.generated_rows},
          {"group_roots", c.group_roots}};
}

PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c) {
  auto unknown = [](const std::string& where, const std::string& key) {
    throw Error(ErrorCode::InvalidConfig, "unknown config key " + where + key);
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "classifier") {
        for (const auto& [k, x] : v.items()) {
          if (k == "hidden") c.classifier.hidden = x.get<std::vector<int>>();
          else if (k == "max_epochs") c.classifier.max_epochs = x.get<int>();
          else if (k == "batch_size") c.classifier.batch_size = x.get<int>();
          else if (k == "patience") c.classifier.patience = x.get<int>();
          else if (k == "learning_rate") c.classifier.learning_rate = x.get<double>();
          else unknown("classifier.", k);
        }
      } else if (key == "scm") {
        for (const auto& [k, x] : v.items()) {
          if (k == "epochs") c.scm.epochs = x.get<int>();
          else if (k == "batch_size") c.scm.batch_size = x.get<int>();
          else if (k == "learning_rate") c.scm.learning_rate = x.get<double>();
          else if (k == "hidden") c.scm.hidden = x.get<int>();
          else if (k == "bandwidth_rows") c.scm.bandwidth_rows = x.get<Index>();
          else unknown("scm.", k);
        }
      } else if (key == "joint") {
        for (const auto& [k, x] : v.items()) {
          if (k == "tau") c.joint.tau = x.get<double>();
          else if (k == "unlabelled_weight") c.joint.unlabelled_weight = x.get<double>();
          else unknown("joint.", k);
        }
      } else if (key == "entmin_lambda") {
        c.entmin_lambda = v.get<double>();
      } else if (key == "generated_rows") {
        c.generated_rows = v.get<Index>();
      } else if (key == "group_roots") {
        c.group_roots = v.get<bool>();
      } else {
        unknown("", key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  if (c.classifier.max_epochs < 1 || c.classifier.batch_size < 1 || c.classifier.patience < 1 || c.scm.epochs < 0 ||
      c.scm.batch_size < 1 || c.joint.tau <= 0.0)
    throw Error(ErrorCode::InvalidConfig, "config values out of range");
  return c;
}

}  // namespace cssl
