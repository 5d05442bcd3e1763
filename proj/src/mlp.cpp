#include "cssl/mlp.hpp"

#include <cmath>
#include <random>

#include "cssl/error.hpp"
#include "cssl/random.hpp"

namespace cssl {

std::vector<int> MlpParams::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(static_cast<int>(layers.front().weight.cols()));
  for (const auto& l : layers) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

MlpParams mlp_init(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw Error(ErrorCode::InvalidDims, "need at least input and output dims");
  for (int d : layer_dims)
    if (d <= 0) throw Error(ErrorCode::InvalidDims, "layer dims must be positive");
  Rng rng(seed);
  MlpParams p;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const int in = layer_dims[k], out = layer_dims[k + 1];
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = u(rng);
    p.layers.push_back(std::move(l));
  }
  return p;
}

Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& batch) {
  if (batch.cols() != p.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "batch has " + std::to_string(batch.cols()) +
                                              " columns, network expects " + std::to_string(p.input_dim()));
  Eigen::MatrixXd h = batch;
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& l = p.layers[k];
    Eigen::MatrixXd z = h * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    h = (k + 1 < p.layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

MlpVars bind(diff::Tape& tape, const MlpParams& p) {
  MlpVars v;
  for (const auto& l : p.layers) {
    v.weights.push_back(tape.parameter(l.weight));
    v.biases.push_back(tape.parameter(l.bias));
  }
  return v;
}

diff::Var mlp_forward(const MlpVars& net, const diff::Var& batch) {
  if (batch.cols() != net.weights.front().cols())
    throw Error(ErrorCode::ShapeMismatch, "batch has " + std::to_string(batch.cols()) +
                                              " columns, network expects " +
                                              std::to_string(net.weights.front().cols()));
  diff::Var h = batch;
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    h = diff::affine(h, net.weights[k], net.biases[k]);
    if (k + 1 < net.weights.size()) h = diff::relu(h);
  }
  return h;
}

MlpParams gradients(const MlpVars& net) {
  MlpParams g;
  for (std::size_t k = 0; k < net.weights.size(); ++k)
    g.layers.push_back({net.weights[k].grad(), net.biases[k].grad().col(0)});
  return g;
}

OptState make_opt_state(const MlpParams& p, double learning_rate) {
  OptState s;
  s.learning_rate = learning_rate;
  for (const auto& l : p.layers) {
    DenseLayer z{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())};
    s.first.push_back(z);
    s.second.push_back(z);
  }
  return s;
}

namespace {

template <typename P, typename G, typename M>
void adam_update(P& param, const G& grad, M& m, M& v, const OptState& s, double c1, double c2) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  param.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
}

}  // namespace

void opt_step(MlpParams& p, const MlpParams& grads, OptState& s) {
  if (grads.layers.size() != p.layers.size() || s.first.size() != p.layers.size())
    throw Error(ErrorCode::ShapeMismatch, "optimizer layer count differs from parameters");
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& g = grads.layers[k];
    const auto& l = p.layers[k];
    if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() ||
        g.bias.size() != l.bias.size() || s.first[k].weight.rows() != l.weight.rows() ||
        s.first[k].weight.cols() != l.weight.cols())
      throw Error(ErrorCode::ShapeMismatch, "gradient shape differs from layer " + std::to_string(k));
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    adam_update(p.layers[k].weight, grads.layers[k].weight, s.first[k].weight, s.second[k].weight, s, c1, c2);
    Eigen::VectorXd& b = p.layers[k].bias;
    adam_update(b, grads.layers[k].bias, s.first[k].bias, s.second[k].bias, s, c1, c2);
  }
}

nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json j;
  j["format"] = "cssl-mlp";
  j["version"] = kMlpCheckpointVersion;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : p.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    j["layers"].push_back({{"rows", l.weight.rows()}, {"cols", l.weight.cols()}, {"weight", w}, {"bias", b}});
  }
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "cssl-mlp") throw Error(ErrorCode::ParseError, "not a cssl-mlp checkpoint");
    if (j.at("version").get<int>() != kMlpCheckpointVersion)
      throw Error(ErrorCode::ParseError, "unsupported checkpoint version");
    MlpParams p;
    for (const auto& jl : j.at("layers")) {
      const auto rows = jl.at("rows").get<Eigen::Index>();
      const auto cols = jl.at("cols").get<Eigen::Index>();
      const auto w = jl.at("weight").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
        throw Error(ErrorCode::ParseError, "layer value count does not match shape");
      DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        l.bias(r) = b[static_cast<std::size_t>(r)];
      }
      if (!p.layers.empty() && p.layers.back().weight.rows() != cols)
        throw Error(ErrorCode::ShapeMismatch, "checkpoint layers do not chain");
      p.layers.push_back(std::move(l));
    }
    if (p.layers.empty()) throw Error(ErrorCode::ParseError, "checkpoint has no layers");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace cssl
