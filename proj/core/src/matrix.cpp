#include "coupon/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coupon/errors.hpp"

namespace coupon::nn {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(rows, cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

void check_finite(std::span<const double> values, std::string_view what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvariantBreach("non-finite value in " + std::string(what));
    }
  }
}

void check_finite(const Matrix& m, std::string_view what) {
  check_finite(m.values(), what);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " +
                     shape_str(a.rows(), a.cols()) + " and " +
                     shape_str(b.rows(), b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  check_finite(out, "matmul result");
  return out;
}

void matvec(const Matrix& w, std::span<const double> x, std::span<double> out) {
  if (w.cols() != x.size() || w.rows() != out.size()) {
    throw ShapeError("matvec: matrix " + shape_str(w.rows(), w.cols()) +
                     " against vectors " + std::to_string(x.size()) + "/" +
                     std::to_string(out.size()));
  }
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto row = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  check_finite(out, "matvec result");
}

void matvec_transposed_add(const Matrix& w, std::span<const double> y,
                           std::span<double> out) {
  if (w.rows() != y.size() || w.cols() != out.size()) {
    throw ShapeError("matvec_transposed_add: matrix " +
                     shape_str(w.rows(), w.cols()) + " against vectors " +
                     std::to_string(y.size()) + "/" +
                     std::to_string(out.size()));
  }
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    const auto row = w.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += yi * row[j];
  }
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_inplace(std::span<double> x) {
  if (x.empty()) return;
  const double m = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double& v : x) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : x) v /= total;
  check_finite(x, "softmax result");
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  softmax_inplace(out);
  return out;
}

}  // namespace coupon::nn
