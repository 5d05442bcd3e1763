#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include <Eigen/Core>

#include "cssl/diff.hpp"
#include "cssl/error.hpp"

namespace cssl {

/// Five-component RBF mixture: component n (1..5) uses bandwidth 2^(n-3) * base.
/// Bandwidths are in squared-distance units, k(x,x') = exp(-|x-x'|^2 / (2 sigma)).
class KernelSpec {
 public:
  static constexpr std::array<double, 5> kRatios{0.25, 0.5, 1.0, 2.0, 4.0};

  explicit KernelSpec(double base) : base_(base) {
    if (!(base > 0.0) || !std::isfinite(base))
      throw Error(ErrorCode::NonPositiveBandwidth, "bandwidth must be positive and finite");
  }

  [[nodiscard]] double base() const noexcept { return base_; }
  [[nodiscard]] std::array<double, 5> bandwidths() const noexcept {
    std::array<double, 5> out{};
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = kRatios[n] * base_;
    return out;
  }

 private:
  double base_;
};

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rbf(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y,
                              typename DerivedA::Scalar sigma) {
  using std::exp;
  if (!(sigma > 0)) throw Error(ErrorCode::NonPositiveBandwidth, "rbf bandwidth must be positive");
  if (x.size() != y.size()) throw Error(ErrorCode::DimMismatch, "rbf operands differ in size");
  return exp(-(x.derived().reshaped() - y.derived().reshaped()).squaredNorm() / (2 * sigma));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar mixture_k(const Eigen::MatrixBase<DerivedA>& x,
                                    const Eigen::MatrixBase<DerivedB>& y, const KernelSpec& spec) {
  typename DerivedA::Scalar k = 0;
  for (double bw : spec.bandwidths()) k += rbf(x, y, static_cast<typename DerivedA::Scalar>(bw));
  return k;
}

/// Median of squared pairwise distances over unordered distinct row pairs, with
/// fallbacks: mean squared distance when the median is 0, then 1.
/// Throws Error{TooFewPoints} for fewer than two rows.
double median_bandwidth(const Eigen::MatrixXd& sample);

/// As median_bandwidth, on a seeded subsample of at most `max_rows` rows.
double median_bandwidth(const Eigen::MatrixXd& sample, Eigen::Index max_rows, std::uint64_t seed);

/// Biased (V-statistic) MMD^2 with the mixture kernel:
/// mean K(a,a) + mean K(b,b) - 2 mean K(a,b). Exactly symmetric in (a, b).
double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& spec);

/// Differentiable MMD^2 on a tape with respect to either operand.
diff::Var mmd2(const diff::Var& a, const diff::Var& b, const KernelSpec& spec);

/// Permutation null for the biased MMD^2 statistic: returns the fraction of
/// `permutations` label-shuffled statistics that are >= the observed one, and
/// the empirical 95th percentile of the null.
struct PermutationTest {
  double statistic = 0.0;
  double null_q95 = 0.0;
  double p_value = 1.0;
};

PermutationTest mmd_permutation_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     const KernelSpec& spec, int permutations, std::uint64_t seed);

}  // namespace cssl
