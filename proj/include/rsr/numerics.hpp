#pragma once

// Dense row-major double-precision matrices and the handful of linear-algebra
// and statistics kernels the rest of the library needs. Everything here is a
// pure function of its inputs and evaluates in a fixed order, so identical
// inputs give bitwise identical outputs.

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace rsr {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Exact element-wise bit equality (distinguishes -0.0 from 0.0, NaN payloads).
bool bitwise_equal(const Matrix& a, const Matrix& b);

// --- products -------------------------------------------------------------

/// out = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// out += a^T * b
void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out = a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
/// Adds the 1 x cols row vector to every row of m.
void add_row_vector(Matrix& m, const Matrix& bias);
/// out += column sums of m (out is 1 x cols).
void column_sums_acc(const Matrix& m, Matrix& out);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double frobenius_norm(const Matrix& m);

// --- softmax / similarity ---------------------------------------------------

/// Row-wise softmax with max subtraction. With `causal`, entry (i, j) for
/// j > i is forced to exactly zero and excluded from the normaliser.
/// Throws InvalidArgument on an empty or non-finite matrix.
Matrix softmax_rows(const Matrix& m, bool causal = false);

/// Cosine of the angle between a and b. Throws on length mismatch or a
/// zero vector. The result is clamped to [-1, 1].
double cosine_sim(std::span<const double> a, std::span<const double> b);

// --- eigen / PCA ------------------------------------------------------------

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k is the unit eigenvector for values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps visit the
/// upper triangle in row-major order. Eigenvectors are sign-normalised so
/// their largest-magnitude entry is positive (first such entry on ties).
SymmetricEigen jacobi_eigen(const Matrix& symmetric);

/// Sample covariance (divisor n - 1) of the rows of `points`.
Matrix sample_covariance(const Matrix& points);

struct Pca2 {
  Matrix projections;              // n x 2, coordinates of centred points
  std::array<double, 2> eigenvalues{};  // two largest, descending
  Matrix axes;                     // d x 2 unit eigenvectors
};

/// Projects the rows of `points` (n x d) onto the two leading principal axes
/// of their sample covariance. Requires n >= 2 and d >= 2.
Pca2 pca2(const Matrix& points);

}  // namespace rsr
