// Dense row-major float64 matrix plus the handful of kernels the intent
// network needs. Public operations leave only finite values behind.
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace coupon::nn {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  // Row r as a contiguous span.
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double value) { data_.assign(data_.size(), value); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws InvariantBreach naming `what` if any entry is NaN/Inf.
void check_finite(const Matrix& m, std::string_view what);
void check_finite(std::span<const double> values, std::string_view what);

// Standard product. ShapeError (naming both shapes) unless a.cols == b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

// out = W x. ShapeError unless W.cols == x.size() and W.rows == out.size().
void matvec(const Matrix& w, std::span<const double> x, std::span<double> out);

// out += W^T y. Backward companion of matvec.
void matvec_transposed_add(const Matrix& w, std::span<const double> y,
                           std::span<double> out);

Matrix transpose(const Matrix& a);

// Activations. Sigmoid/tanh use numerically stable forms; softmax subtracts
// the max so inputs with magnitude up to ~1e3 stay exact.
double sigmoid(double x);
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
void softmax_inplace(std::span<double> x);
std::vector<double> softmax(std::span<const double> x);

}  // namespace coupon::nn
