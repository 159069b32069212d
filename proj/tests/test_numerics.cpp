#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rsr/error.hpp"
#include "rsr/numerics.hpp"
#include "support.hpp"

using namespace rsr;
using rsr::test::random_matrix;

namespace {

// Eigenvalues of a symmetric 3x3 matrix from its characteristic polynomial,
// solved in closed form (trigonometric cubic). Descending.
std::array<double, 3> eigenvalues_3x3(const double a[3][3]) {
  const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
  const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) +
                    2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  double b[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                     b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e1, 3.0 * q - e1 - e3, e3};
}

}  // namespace

TEST_CASE("softmax closed forms") {
  auto s = softmax_rows(Matrix::from_rows({{1, 1}, {0, std::log(3.0)}, {1000, 1000}}));
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s(1, 1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s(2, 0) == 0.5);
  CHECK(s(2, 1) == 0.5);
}

TEST_CASE("softmax causal mask zeroes the upper triangle") {
  auto s = softmax_rows(Matrix::from_rows({{3, 9, 9}, {1, 2, 9}, {0, 0, 0}}), true);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(s(1, 2) == 0.0);
  CHECK(s(2, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax rows sum to one for wide random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto m = random_matrix(rng, 3, 1 + rng.below(12), -50.0, 50.0);
    auto s = softmax_rows(m);
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double sum = 0.0;
      for (double x : s.row(i)) sum += x;
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("softmax rejects empty and non-finite input") {
  CHECK_THROWS_AS(softmax_rows(Matrix()), InvalidArgument);
  CHECK_THROWS_AS(softmax_rows(Matrix::from_rows({{1, NAN}})), InvalidArgument);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> x{1, 0}, y{0, 1}, a{1, 2}, b{2, 4}, c{1, 1};
  CHECK(cosine_sim(x, y) == 0.0);
  CHECK(cosine_sim(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_sim(x, c) == doctest::Approx(0.7071067811865475).epsilon(1e-15));
  CHECK_THROWS_AS(cosine_sim(x, std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(cosine_sim(x, std::vector<double>{0, 0}), InvalidArgument);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = random_matrix(rng, 1, 7, -5, 5);
    CHECK(std::fabs(cosine_sim(v.row(0), v.row(0)) - 1.0) <= 1e-12);
  }
}

TEST_CASE("tiled matmul equals the naive triple loop bitwise") {
  Rng rng(5);
  for (auto [n, k, m] : {std::array<std::size_t, 3>{1, 1, 1}, {5, 7, 3}, {9, 4, 13}, {16, 16, 16}}) {
    auto a = random_matrix(rng, n, k), b = random_matrix(rng, k, m);
    Matrix ref(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(p, j);
        ref(i, j) = s;
      }
    CHECK(bitwise_equal(matmul(a, b), ref));
    CHECK(bitwise_equal(matmul_a_bt(a, transpose(b)), ref));
  }
}

TEST_CASE("pca2 on rank-one data") {
  auto pts = Matrix::from_rows({{1, 2}, {2, 4}, {3, 6}, {-1, -2}});
  auto p = pca2(pts);
  CHECK(std::fabs(p.eigenvalues[1]) <= 1e-10);
  CHECK(p.axes(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(p.axes(1, 0) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("pca2 on identical points") {
  auto p = pca2(Matrix(5, 3, 1.5));
  CHECK(p.eigenvalues[0] == 0.0);
  CHECK(p.eigenvalues[1] == 0.0);
}

TEST_CASE("pca2 eigenvalues match the characteristic polynomial of the covariance") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    auto pts = random_matrix(rng, 6, 3, -3, 3);
    double mean[3] = {0, 0, 0};
    for (std::size_t i = 0; i < 6; ++i)
      for (int j = 0; j < 3; ++j) mean[j] += pts(i, j) / 6.0;
    double cov[3][3] = {};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 6; ++i) cov[r][c] += (pts(i, r) - mean[r]) * (pts(i, c) - mean[c]);
        cov[r][c] /= 5.0;
      }
    const auto ev = eigenvalues_3x3(cov);
    const auto p = pca2(pts);
    CHECK(std::fabs(p.eigenvalues[0] - ev[0]) <= 1e-8);
    CHECK(std::fabs(p.eigenvalues[1] - ev[1]) <= 1e-8);
  }
}

TEST_CASE("pca2 captured variance is bounded by the covariance trace") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto pts = random_matrix(rng, 7, 2 + rng.below(4));
    auto cov = sample_covariance(pts);
    double tr = 0.0;
    for (std::size_t i = 0; i < cov.rows(); ++i) tr += cov(i, i);
    auto p = pca2(pts);
    CHECK(p.eigenvalues[0] + p.eigenvalues[1] <= tr + 1e-10);
    if (pts.cols() == 2) CHECK(std::fabs(p.eigenvalues[0] + p.eigenvalues[1] - tr) <= 1e-10);
  }
}

TEST_CASE("pca2 projections have the eigenvalues as variances") {
  Rng rng(9);
  auto pts = random_matrix(rng, 20, 4);
  auto p = pca2(pts);
  for (int k = 0; k < 2; ++k) {
    double ss = 0.0;
    for (std::size_t i = 0; i < 20; ++i) ss += p.projections(i, k) * p.projections(i, k);
    CHECK(ss / 19.0 == doctest::Approx(p.eigenvalues[k]).epsilon(1e-10));
  }
}

TEST_CASE("jacobi eigenvectors reconstruct the matrix") {
  Rng rng(10);
  auto x = random_matrix(rng, 5, 5);
  Matrix s(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) s(i, j) = x(i, j) + x(j, i);
  auto eig = jacobi_eigen(s);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double r = 0.0;
      for (std::size_t k = 0; k < 5; ++k) r += eig.vectors(i, k) * eig.values[k] * eig.vectors(j, k);
      CHECK(r == doctest::Approx(s(i, j)).epsilon(1e-10));
    }
  for (std::size_t k = 1; k < 5; ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
}

TEST_CASE("pca2 is deterministic and rejects degenerate shapes") {
  Rng rng(12);
  auto pts = random_matrix(rng, 9, 5);
  auto a = pca2(pts), b = pca2(pts);
  CHECK(bitwise_equal(a.projections, b.projections));
  CHECK_THROWS_AS(pca2(Matrix(1, 3)), InvalidArgument);
  CHECK_THROWS_AS(pca2(Matrix(4, 1)), InvalidArgument);
}
