#include "rsr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "rsr/error.hpp"

namespace rsr {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i).begin());
    ++i;
  }
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

namespace {

constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 4;

// Register tile: each output element still accumulates a(i, p) * b(p, j)
// in ascending p, so results match the naive triple loop bit for bit.
void matmul_tile(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* out,
                 std::size_t ldo, std::size_t rows, std::size_t cols, std::size_t k) {
  double acc[kTileRows][kTileCols] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* br = b + p * ldb;
    for (std::size_t r = 0; r < rows; ++r) {
      const double s = a[r * lda + p];
      for (std::size_t c = 0; c < cols; ++c) acc[r][c] += s * br[c];
    }
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * ldo + c] = acc[r][c];
}

void matmul_tile_full(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* out,
                      std::size_t ldo, std::size_t k) {
  double acc[kTileRows][kTileCols] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* br = b + p * ldb;
    const double s0 = a[p], s1 = a[lda + p], s2 = a[2 * lda + p], s3 = a[3 * lda + p];
    for (std::size_t c = 0; c < kTileCols; ++c) {
      acc[0][c] += s0 * br[c];
      acc[1][c] += s1 * br[c];
      acc[2][c] += s2 * br[c];
      acc[3][c] += s3 * br[c];
    }
  }
  for (std::size_t r = 0; r < kTileRows; ++r)
    for (std::size_t c = 0; c < kTileCols; ++c) out[r * ldo + c] = acc[r][c];
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix out(n, m);
  if (n == 0 || m == 0) return out;
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  double* op = out.values().data();
  for (std::size_t i = 0; i < n; i += kTileRows) {
    const std::size_t rows = std::min<std::size_t>(kTileRows, n - i);
    for (std::size_t j = 0; j < m; j += kTileCols) {
      const std::size_t cols = std::min<std::size_t>(kTileCols, m - j);
      if (rows == kTileRows && cols == kTileCols) {
        matmul_tile_full(ap + i * k, k, bp + j, m, op + i * m + j, m, k);
      } else {
        matmul_tile(ap + i * k, k, bp + j, m, op + i * m + j, m, rows, cols, k);
      }
    }
  }
  return out;
}

void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols())
    throw InvalidArgument("matmul_at_b_acc: shape mismatch");
  const Matrix prod = matmul(transpose(a), b);
  auto o = out.values();
  auto p = prod.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += p[i];
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("matmul_a_bt: shape mismatch");
  // Same summation order as a row-by-row dot product, but the inner loop runs
  // over contiguous output columns and vectorises.
  return matmul(a, transpose(b));
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

void add_row_vector(Matrix& m, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols())
    throw InvalidArgument("add_row_vector: bias shape mismatch");
  const double* b = bias.row(0).data();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* r = m.row(i).data();
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += b[j];
  }
}

void column_sums_acc(const Matrix& m, Matrix& out) {
  if (out.rows() != 1 || out.cols() != m.cols())
    throw InvalidArgument("column_sums_acc: shape mismatch");
  double* o = out.row(0).data();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i).data();
    for (std::size_t j = 0; j < m.cols(); ++j) o[j] += r[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double frobenius_norm(const Matrix& m) { return l2_norm(m.values()); }

Matrix softmax_rows(const Matrix& m, bool causal) {
  if (m.empty()) throw InvalidArgument("softmax_rows: empty matrix");
  if (!m.all_finite()) throw InvalidArgument("softmax_rows: non-finite input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const std::size_t width = causal ? std::min(i + 1, m.cols()) : m.cols();
    auto in = m.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.begin() + width);
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= sum;
  }
  return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_sim: length mismatch");
  const bool same = std::equal(a.begin(), a.end(), b.begin());
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine_sim: zero vector");
  if (same) return 1.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

namespace {

void fix_sign(Matrix& vectors, std::size_t col) {
  std::size_t best = 0;
  double best_abs = -1.0;
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    const double v = std::fabs(vectors(r, col));
    if (v > best_abs) {
      best_abs = v;
      best = r;
    }
  }
  if (vectors(best, col) < 0.0) {
    for (std::size_t r = 0; r < vectors.rows(); ++r) vectors(r, col) = -vectors(r, col);
  }
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& symmetric) {
  const std::size_t n = symmetric.rows();
  if (n == 0 || symmetric.cols() != n) throw InvalidArgument("jacobi_eigen: matrix must be square");
  if (!symmetric.all_finite()) throw InvalidArgument("jacobi_eigen: non-finite input");

  Matrix a = symmetric;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  const double scale = frobenius_norm(a);
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off == 0.0 || std::sqrt(off) <= 1e-15 * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::fabs(theta) > 1e150) {
          t = 1.0 / (2.0 * theta);
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    fix_sign(out.vectors, k);
  }
  return out;
}

Matrix sample_covariance(const Matrix& points) {
  const std::size_t n = points.rows(), d = points.cols();
  if (n < 2) throw InvalidArgument("sample_covariance: need at least two points");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += points(i, j);
  for (double& m : mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = points(i, j) - mean[j];

  Matrix cov(d, d);
  matmul_at_b_acc(centered, centered, cov);
  const double denom = static_cast<double>(n - 1);
  for (double& x : cov.values()) x /= denom;
  // Symmetrise exactly so Jacobi sees a truly symmetric input.
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = p + 1; q < d; ++q) cov(q, p) = cov(p, q);
  return cov;
}

Pca2 pca2(const Matrix& points) {
  if (points.rows() < 2) throw InvalidArgument("pca2: need at least two points");
  if (points.cols() < 2) throw InvalidArgument("pca2: need at least two dimensions");
  if (!points.all_finite()) throw InvalidArgument("pca2: non-finite input");
  const std::size_t n = points.rows(), d = points.cols();

  const SymmetricEigen eig = jacobi_eigen(sample_covariance(points));

  Pca2 out;
  out.axes = Matrix(d, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    // Covariance is PSD; tiny negative round-off is clamped to zero.
    out.eigenvalues[k] = std::max(eig.values[k], 0.0);
    for (std::size_t r = 0; r < d; ++r) out.axes(r, k) = eig.vectors(r, k);
  }

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += points(i, j);
  for (double& m : mean) m /= static_cast<double>(n);

  out.projections = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (points(i, j) - mean[j]) * out.axes(j, k);
      out.projections(i, k) = s;
    }
  }
  return out;
}

}  // namespace rsr
