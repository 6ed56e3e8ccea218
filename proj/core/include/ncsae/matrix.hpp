#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ncsae {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// "RxC", used in error messages.
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Products. The summation order for each entry depends only on the operand
// shapes, so results are reproducible bit for bit.

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Logistic sigmoid, elementwise. Saturates to 0/1 without producing NaN.
double sigmoid(double x);
Matrix sigmoid(const Matrix& x);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& z);

/// Adds `bias` to every row of `m` in place.
void add_row_vector(Matrix& m, std::span<const double> bias);

Vector column_sums(const Matrix& m);
Vector column_means(const Matrix& m);

/// Per-row argmax; ties resolve to the lowest index.
std::vector<std::size_t> argmax_rows(const Matrix& m);

bool all_finite(std::span<const double> values);

/// Rows of `m` selected by `indices`, in the given order.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices);

}  // namespace ncsae
