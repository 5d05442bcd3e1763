#include <doctest.h>

#include <cmath>

#include "cssl/error.hpp"
#include "cssl/kernels.hpp"
#include "cssl/random.hpp"

using namespace cssl;
using Eigen::MatrixXd;

namespace {

MatrixXd randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  return standard_normal(r, c, rng).array() + shift;
}

double brute_mmd2(const MatrixXd& a, const MatrixXd& b, const KernelSpec& spec) {
  auto k = [&](const MatrixXd& p, Eigen::Index i, const MatrixXd& q, Eigen::Index j) {
    double s = 0.0;
    for (double bw : spec.bandwidths()) s += std::exp(-(p.row(i) - q.row(j)).squaredNorm() / (2.0 * bw));
    return s;
  };
  double aa = 0, bb = 0, ab = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.rows(); ++j) aa += k(a, i, a, j);
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) bb += k(b, i, b, j);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) ab += k(a, i, b, j);
  const double n = static_cast<double>(a.rows()), m = static_cast<double>(b.rows());
  return aa / (n * n) + bb / (m * m) - 2.0 * ab / (n * m);
}

}  // namespace

TEST_CASE("rbf values") {
  Eigen::VectorXd x(2), y(2);
  x << 0.3, -1.0;
  CHECK(rbf(x, x, 0.7) == 1.0);
  y = x;
  y(0) += std::sqrt(2.0 * 0.7);
  CHECK(rbf(x, y, 0.7) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  Eigen::VectorXd z0(1), z1(1);
  z0 << 0.0;
  z1 << 1.0;
  CHECK(rbf(z0, z1, 1.0) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK_THROWS_AS(rbf(z0, z1, 0.0), Error);
  CHECK_THROWS_AS(rbf(x, z1, 1.0), Error);
}

TEST_CASE("mixture kernel") {
  KernelSpec spec(1.3);
  Eigen::VectorXd x(2), y(2);
  x << 1, 2;
  CHECK(mixture_k(x, x, spec) == 5.0);
  y << 1e3, -1e3;
  CHECK(mixture_k(x, y, spec) < 1e-12);
  y = x;
  y(1) += std::sqrt(2.0 * 1.3);
  double expected = 0.0;
  for (double r : KernelSpec::kRatios) expected += std::exp(-1.0 / r);
  CHECK(mixture_k(x, y, spec) == doctest::Approx(expected).epsilon(1e-12));
  double prev = 5.0;
  for (double d = 0.1; d < 5; d += 0.1) {
    y = x;
    y(0) += d;
    const double k = mixture_k(x, y, spec);
    CHECK(k < prev);
    CHECK(k > 0.0);
    prev = k;
  }
  CHECK_THROWS_AS(KernelSpec(0.0), Error);
  CHECK_THROWS_AS(KernelSpec(-1.0), Error);
}

TEST_CASE("median bandwidth") {
  MatrixXd s(3, 1);
  s << 0, 1, 2;
  CHECK(median_bandwidth(s) == 1.0);
  CHECK(median_bandwidth(MatrixXd::Constant(5, 2, 3.0)) == 1.0);
  MatrixXd two(2, 2);
  two << 0, 0, 3, 4;
  CHECK(median_bandwidth(two) == 25.0);
  MatrixXd dup(4, 1);
  dup << 0, 0, 0, 2;  // sq distances {0,0,4,0,4,4}: median 2
  CHECK(median_bandwidth(dup) == 2.0);
  MatrixXd heavy(5, 1);
  heavy << 0, 0, 0, 0, 1;  // median 0, mean 0.4
  CHECK(median_bandwidth(heavy) == doctest::Approx(0.4));
  CHECK_THROWS_AS(median_bandwidth(MatrixXd(1, 2)), Error);
  const MatrixXd big = randn(500, 2, 4);
  CHECK(median_bandwidth(big, 1000, 1) == median_bandwidth(big));
  CHECK(median_bandwidth(big, 100, 1) == median_bandwidth(big, 100, 1));
}

TEST_CASE("mmd2 identities") {
  KernelSpec spec(0.8);
  const MatrixXd a = randn(30, 3, 1);
  CHECK(mmd2(a, a, spec) == 0.0);
  const MatrixXd b = randn(20, 3, 2, 0.5);
  CHECK(mmd2(a, b, spec) == mmd2(b, a, spec));
  MatrixXd x(1, 2), y(1, 2);
  x << 0, 1;
  y << 1, 1;
  CHECK(mmd2(x, y, spec) == doctest::Approx(10.0 - 2.0 * mixture_k(x.row(0).transpose(), y.row(0).transpose(), spec)));
  CHECK_THROWS_AS(mmd2(a, randn(4, 2, 1), spec), Error);
}

TEST_CASE("mmd2 matches brute-force oracle") {
  for (std::uint64_t c = 0; c < 50; ++c) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(c % 17), m = 3 + static_cast<Eigen::Index>((c * 7) % 13);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(c % 4);
    const MatrixXd a = randn(n, d, 100 + c), b = randn(m, d, 200 + c, 0.3 * static_cast<double>(c % 5));
    MatrixXd ab(n + m, d);
    ab << a, b;
    KernelSpec spec(median_bandwidth(ab));
    CHECK(std::abs(mmd2(a, b, spec) - brute_mmd2(a, b, spec)) <= 1e-10);
  }
  const MatrixXd p = randn(200, 1, 7), q = randn(200, 1, 8, 5.0), r = randn(200, 1, 9);
  MatrixXd pq(400, 1);
  pq << p, q;
  KernelSpec spec(median_bandwidth(pq));
  const double far = mmd2(p, q, spec);
  CHECK(std::abs(far - brute_mmd2(p, q, spec)) <= 1e-10);
  CHECK(far > mmd2(p, r, spec));
}

TEST_CASE("mmd2 tape value and gradients") {
  for (std::uint64_t c = 0; c < 10; ++c) {
    const MatrixXd a = randn(6, 2, 300 + c), b = randn(5, 2, 400 + c, 0.7);
    KernelSpec spec(0.5 + 0.2 * static_cast<double>(c));
    diff::Tape t;
    auto va = t.parameter(a);
    auto vb = t.parameter(b);
    auto loss = mmd2(va, vb, spec);
    CHECK(loss.scalar() == doctest::Approx(mmd2(a, b, spec)).epsilon(1e-12));
    t.backward(loss);
    const double h = 1e-4;
    for (const auto& [which, base] : {std::pair{0, a}, std::pair{1, b}}) {
      const MatrixXd& g = which == 0 ? va.grad() : vb.grad();
      for (Eigen::Index k = 0; k < base.size(); ++k) {
        MatrixXd up = base, dn = base;
        up.data()[k] += h;
        dn.data()[k] -= h;
        const double fd = which == 0 ? (mmd2(up, b, spec) - mmd2(dn, b, spec)) / (2 * h)
                                     : (mmd2(a, up, spec) - mmd2(a, dn, spec)) / (2 * h);
        const double an = g.data()[k];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        if (std::abs(fd) > 1e-7) CHECK(rel <= 1e-4);
      }
    }
  }
}

TEST_CASE("permutation test") {
  const MatrixXd a = randn(60, 2, 1), same = randn(60, 2, 2), shifted = randn(60, 2, 3, 1.5);
  MatrixXd ab(120, 2);
  ab << a, same;
  KernelSpec spec(median_bandwidth(ab));
  auto null_case = mmd_permutation_test(a, same, spec, 200, 5);
  auto alt = mmd_permutation_test(a, shifted, spec, 200, 5);
  CHECK(null_case.p_value > 0.05);
  CHECK(alt.p_value < 0.01);
  CHECK(alt.statistic > alt.null_q95);
  auto again = mmd_permutation_test(a, shifted, spec, 200, 5);
  CHECK(again.null_q95 == alt.null_q95);
}
