#include "cssl/kernels.hpp"

#include <numeric>
#include <vector>

#include "cssl/random.hpp"

namespace cssl {

double median_bandwidth(const Eigen::MatrixXd& sample) {
  const auto n = sample.rows();
  if (n < 2) throw Error(ErrorCode::TooFewPoints, "median heuristic needs at least two rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((sample.row(i) - sample.row(j)).squaredNorm());
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (median > 0.0) return median;
  const double mean = total / static_cast<double>(d.size());
  return mean > 0.0 ? mean : 1.0;
}

double median_bandwidth(const Eigen::MatrixXd& sample, Eigen::Index max_rows, std::uint64_t seed) {
  if (sample.rows() <= max_rows) return median_bandwidth(sample);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(sample.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Eigen::MatrixXd sub(max_rows, sample.cols());
  for (Eigen::Index i = 0; i < max_rows; ++i) sub.row(i) = sample.row(idx[static_cast<std::size_t>(i)]);
  return median_bandwidth(sub);
}

namespace {

double kernel_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const std::array<double, 5>& bw) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double d = (a.row(i) - b.row(j)).squaredNorm();
      for (double s : bw) row += std::exp(-d / (2.0 * s));
    }
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

// Canonical operand order so that the cross term is summed identically for (a,b) and (b,a).
bool ordered_first(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  return !std::lexicographical_compare(b.data(), b.data() + b.size(), a.data(), a.data() + a.size());
}

}  // namespace

double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& spec) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimMismatch, "mmd2 operands differ in width");
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::TooFewPoints, "mmd2 needs nonempty samples");
  const auto bw = spec.bandwidths();
  const double kaa = kernel_mean(a, a, bw);
  const double kbb = kernel_mean(b, b, bw);
  const double kab = ordered_first(a, b) ? kernel_mean(a, b, bw) : kernel_mean(b, a, bw);
  return kaa + kbb - 2.0 * kab;
}

diff::Var mmd2(const diff::Var& a, const diff::Var& b, const KernelSpec& spec) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimMismatch, "mmd2 operands differ in width");
  const auto bwa = spec.bandwidths();
  const std::vector<double> bw(bwa.begin(), bwa.end());
  auto kaa = diff::mean(diff::rbf_mixture(diff::sqdist(a, a), bw));
  auto kbb = diff::mean(diff::rbf_mixture(diff::sqdist(b, b), bw));
  auto kab = diff::mean(diff::rbf_mixture(diff::sqdist(a, b), bw));
  return (kaa + kbb) - 2.0 * kab;
}

PermutationTest mmd_permutation_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     const KernelSpec& spec, int permutations, std::uint64_t seed) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimMismatch, "permutation test operands differ in width");
  const auto n = a.rows(), m = b.rows(), total = n + m;
  Eigen::MatrixXd pooled(total, a.cols());
  pooled << a, b;
  const auto bw = spec.bandwidths();
  Eigen::MatrixXd k(total, total);
  for (Eigen::Index i = 0; i < total; ++i)
    for (Eigen::Index j = i; j < total; ++j) {
      const double d = (pooled.row(i) - pooled.row(j)).squaredNorm();
      double v = 0.0;
      for (double s : bw) v += std::exp(-d / (2.0 * s));
      k(i, j) = k(j, i) = v;
    }
  auto statistic = [&](const std::vector<Eigen::Index>& idx) {
    double saa = 0, sbb = 0, sab = 0;
    for (Eigen::Index i = 0; i < total; ++i) {
      const bool ia = i < n;
      for (Eigen::Index j = 0; j < total; ++j) {
        const double v = k(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        const bool ja = j < n;
        if (ia && ja) saa += v;
        else if (!ia && !ja) sbb += v;
        else sab += v;
      }
    }
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return saa / (dn * dn) + sbb / (dm * dm) - sab / (dn * dm);
  };
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  PermutationTest out;
  out.statistic = statistic(idx);
  Rng rng(seed);
  std::vector<double> null;
  null.reserve(static_cast<std::size_t>(permutations));
  int exceed = 0;
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(idx.begin(), idx.end(), rng);
    null.push_back(statistic(idx));
    if (null.back() >= out.statistic) ++exceed;
  }
  std::sort(null.begin(), null.end());
  const auto q = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(null.size()))) - 1;
  out.null_q95 = null.empty() ? 0.0 : null[std::min(q, null.size() - 1)];
  out.p_value = (1.0 + exceed) / (1.0 + permutations);
  return out;
}

}  // namespace cssl
