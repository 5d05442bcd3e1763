#include "cssl/diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cssl/error.hpp"

namespace cssl::diff {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, Backward backward) {
  bool rg = false;
  for (auto i : inputs) rg = rg || nodes_[i].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs), rg ? std::move(backward) : Backward{}, rg});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  const auto root = loss.id();
  const auto& v = nodes_[root].value;
  if (v.rows() != 1 || v.cols() != 1)
    throw Error(ErrorCode::ShapeMismatch, "backward() needs a 1x1 loss");
  if (!std::isfinite(v(0, 0))) throw Error(ErrorCode::NonFiniteLoss, std::to_string(v(0, 0)));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (nodes_[root].requires_grad) nodes_[root].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
  for (auto& n : nodes_)
    if (n.requires_grad && n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch,
                std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

Matrix stable_sigmoid(const Matrix& x) {
  return x.unaryExpr([](double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var operator*(double s, const Var& a) {
  const auto ia = a.id();
  return a.tape().record(s * a.value(), {ia},
                         [ia, s](Tape& t, std::size_t self) { t.accumulate(ia, s * t.grad(self)); });
}

Var add_scalar(const Var& a, double s) {
  const auto ia = a.id();
  return a.tape().record(a.value().array() + s, {ia},
                         [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {ia, ib},
                         [ia, ib](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                           t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                         });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions differ");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var affine(const Var& a, const Var& w, const Var& b) {
  if (a.cols() != w.cols() || b.rows() != w.rows() || b.cols() != 1)
    throw Error(ErrorCode::ShapeMismatch,
                "affine: input has " + std::to_string(a.cols()) + " columns, layer expects " +
                    std::to_string(w.cols()));
  const auto ia = a.id(), iw = w.id(), ib = b.id();
  Matrix out = a.value() * w.value().transpose();
  out.rowwise() += b.value().col(0).transpose();
  return a.tape().record(std::move(out), {ia, iw, ib}, [ia, iw, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(iw));
    if (t.requires_grad(iw)) t.accumulate(iw, g.transpose() * t.value(ia));
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum().transpose());
  });
}

Var relu(const Var& a) {
  const auto ia = a.id();
  return a.tape().record(a.value().cwiseMax(0.0), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& x = t.value(ia);
    t.accumulate(ia, t.grad(self).cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var sigmoid(const Var& a) {
  const auto ia = a.id();
  return a.tape().record(stable_sigmoid(a.value()), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& s = t.value(self);
    t.accumulate(ia, (t.grad(self).array() * s.array() * (1.0 - s.array())).matrix());
  });
}

Var softplus(const Var& a) {
  const auto ia = a.id();
  Matrix out = a.value().unaryExpr(
      [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); });
  return a.tape().record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(stable_sigmoid(t.value(ia))));
  });
}

Var exp(const Var& a) {
  const auto ia = a.id();
  return a.tape().record(a.value().array().exp().matrix(), {ia}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  const auto ia = a.id();
  return a.tape().record(a.value().array().log().matrix(), {ia}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseQuotient(t.value(ia)));
  });
}

Var sum(const Var& a) {
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& x = t.value(ia);
    t.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var mean(const Var& a) {
  const auto ia = a.id();
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape().record(std::move(out), {ia}, [ia, n](Tape& t, std::size_t self) {
    const auto& x = t.value(ia);
    t.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0) / n));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error(ErrorCode::ShapeMismatch, "concat_cols row counts differ");
    cols += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().tape().record(std::move(out), ids, [ids, widths](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (widths[k] > 0) t.accumulate(ids[k], g.middleCols(off, widths[k]));
      off += widths[k];
    }
  });
}

namespace {

Matrix softmax_of(const Matrix& x) {
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i).array() -= out.row(i).maxCoeff();
    out.row(i) = out.row(i).array().exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// Adjoint of row-wise softmax S given upstream G: S * (G - rowsum(G * S)).
Matrix softmax_backward(const Matrix& s, const Matrix& g) {
  const Eigen::VectorXd dot = g.cwiseProduct(s).rowwise().sum();
  return (s.array() * (g.array().colwise() - dot.array())).matrix();
}

}  // namespace

Var softmax_rows(const Var& a) {
  const auto ia = a.id();
  return a.tape().record(softmax_of(a.value()), {ia}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, softmax_backward(t.value(self), t.grad(self)));
  });
}

Var sqdist(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimMismatch, "sqdist column counts differ");
  const auto ia = a.id(), ib = b.id();
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix d(av.rows(), bv.rows());
  for (Eigen::Index j = 0; j < bv.rows(); ++j)
    for (Eigen::Index i = 0; i < av.rows(); ++i) d(i, j) = (av.row(i) - bv.row(j)).squaredNorm();
  return a.tape().record(std::move(d), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Matrix ga = 2.0 * (av.array().colwise() * g.rowwise().sum().array()).matrix() - 2.0 * g * bv;
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Matrix gb = 2.0 * (bv.array().colwise() * g.colwise().sum().transpose().array()).matrix() -
                  2.0 * g.transpose() * av;
      t.accumulate(ib, gb);
    }
  });
}

Var rbf_mixture(const Var& sqdistances, const std::vector<double>& bandwidths) {
  const auto id = sqdistances.id();
  const Matrix& d = sqdistances.value();
  Matrix k = Matrix::Zero(d.rows(), d.cols());
  Matrix dk = Matrix::Zero(d.rows(), d.cols());
  // Doubling ladders (the usual mixture) reuse one exp through repeated squaring.
  std::vector<double> bw = bandwidths;
  std::sort(bw.begin(), bw.end(), std::greater<>());
  bool ladder = !bw.empty();
  for (std::size_t i = 1; i < bw.size(); ++i) ladder = ladder && bw[i - 1] == 2.0 * bw[i];
  if (ladder) {
    Matrix e = (-d.array() / (2.0 * bw.front())).exp();
    for (std::size_t i = 0; i < bw.size(); ++i) {
      if (i > 0) e = e.cwiseProduct(e);
      k += e;
      dk -= e / (2.0 * bw[i]);
    }
  } else {
    for (double b : bw) {
      Matrix e = (-d.array() / (2.0 * b)).exp();
      k += e;
      dk -= e / (2.0 * b);
    }
  }
  return sqdistances.tape().record(std::move(k), {id}, [id, dk = std::move(dk)](Tape& t, std::size_t self) {
    t.accumulate(id, t.grad(self).cwiseProduct(dk));
  });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw Error(ErrorCode::ShapeMismatch, "bce_with_logits target shape");
  const auto il = logits.id();
  const Matrix& z = logits.value();
  const double n = static_cast<double>(z.size());
  Matrix out(1, 1);
  out(0, 0) = (z.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }) -
               targets.cwiseProduct(z))
                  .sum() /
              n;
  return logits.tape().record(std::move(out), {il}, [il, targets, n](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate(il, (g / n) * (stable_sigmoid(t.value(il)) - targets));
  });
}

Var mean_binary_entropy(const Var& logits) {
  // H(sigmoid(z)) = softplus(z) - z * sigmoid(z)
  return mean(softplus(logits) - hadamard(logits, sigmoid(logits)));
}

Var gumbel_straight_through(const Var& logits, const Matrix& gumbel, double tau) {
  if (logits.rows() != gumbel.rows() || logits.cols() != gumbel.cols())
    throw Error(ErrorCode::ShapeMismatch, "gumbel noise shape");
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidConfig, "gumbel temperature must be positive");
  const auto il = logits.id();
  const Matrix perturbed = logits.value() + gumbel;
  Matrix hard = Matrix::Zero(perturbed.rows(), perturbed.cols());
  for (Eigen::Index i = 0; i < perturbed.rows(); ++i) {
    Eigen::Index k = 0;
    perturbed.row(i).maxCoeff(&k);
    hard(i, k) = 1.0;
  }
  Matrix soft = softmax_of(perturbed / tau);
  return logits.tape().record(std::move(hard), {il},
                              [il, soft = std::move(soft), tau](Tape& t, std::size_t self) {
                                t.accumulate(il, softmax_backward(soft, t.grad(self)) / tau);
                              });
}

}  // namespace cssl::diff
