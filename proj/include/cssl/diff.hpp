#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace cssl::diff {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const { return value()(0, 0); }
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape over dense matrices. Ops append nodes; backward() walks
/// them in reverse accumulating adjoints into every node that depends on a
/// parameter.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Matrix value);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws Error{NonFiniteLoss}
  /// unless `loss` is a finite 1x1 value.
  void backward(const Var& loss);

  [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Adds `g` into the adjoint of node `id`; ignored when the node is constant.
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  Var record(Matrix value, std::vector<std::size_t> inputs, Backward backward);

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

// Elementwise / structural ops. Shapes must agree except where broadcasting is named.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(double s, const Var& a);
Var add_scalar(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
/// a * w^T + 1 * b^T: dense layer on a row batch a (n x in), w (out x in), b (out x 1).
Var affine(const Var& a, const Var& w, const Var& b);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var softmax_rows(const Var& a);

/// Pairwise squared Euclidean distances between rows: (n x d, m x d) -> n x m.
Var sqdist(const Var& a, const Var& b);
/// Elementwise sum_k exp(-d / (2 * bandwidth_k)) over a distance matrix.
Var rbf_mixture(const Var& sqdistances, const std::vector<double>& bandwidths);

/// Mean binary cross entropy of logits (n x 1) against 0/1 targets (n x 1).
Var bce_with_logits(const Var& logits, const Matrix& targets);
/// Mean Bernoulli entropy of sigmoid(logits).
Var mean_binary_entropy(const Var& logits);

/// Straight-through Gumbel-max: forward value is the exact one-hot of
/// argmax(logits + gumbel); backward follows softmax((logits + gumbel) / tau).
Var gumbel_straight_through(const Var& logits, const Matrix& gumbel, double tau);

}  // namespace cssl::diff
