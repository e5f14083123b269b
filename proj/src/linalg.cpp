// Copyright 2026 The ckctx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ckctx/linalg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ckctx/error.hpp"

namespace ckctx {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_non_empty(const Matrix& m, const char* op) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw DimensionError(std::string(op) + ": empty matrix operand");
  }
}

std::size_t checked_mul(std::size_t a, std::size_t b, const char* what) {
  std::size_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw DimensionError(std::string("kron: ") + what + " count overflows");
  }
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(checked_mul(rows, cols, "entry"), fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != checked_mul(rows, cols, "entry")) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw DimensionError("Matrix::from_rows: ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out(i, i) = 1.0;
  }
  return out;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    out[r] = (*this)(r, c);
  }
  return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) {
    throw DimensionError("Matrix::set_col: length mismatch");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    (*this)(r, c) = values[r];
  }
}

std::string_view to_string(NormMode mode) {
  switch (mode) {
    case NormMode::None:
      return "none";
    case NormMode::L1:
      return "l1";
    case NormMode::L2:
      return "l2";
  }
  return "none";
}

NormMode parse_norm_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "none") return NormMode::None;
  if (lower == "l1") return NormMode::L1;
  if (lower == "l2") return NormMode::L2;
  throw InvalidArgument("unknown norm mode '" + std::string(text) + "'");
}

Matrix kron(const Matrix& a, const Matrix& b) {
  require_non_empty(a, "kron");
  require_non_empty(b, "kron");
  const std::size_t rows = checked_mul(a.rows(), b.rows(), "row");
  const std::size_t cols = checked_mul(a.cols(), b.cols(), "column");
  checked_mul(rows, cols, "entry");
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t r = 0; r < b.rows(); ++r) {
        double* dst = &out(i * b.rows() + r, j * b.cols());
        for (std::size_t c = 0; c < b.cols(); ++c) {
          dst[c] = aij * b(r, c);
        }
      }
    }
  }
  return out;
}

Matrix kron_chain(std::span<const Matrix> mats) {
  if (mats.empty()) {
    throw DimensionError("kron_chain: empty sequence");
  }
  Matrix acc = mats.front();
  for (std::size_t i = 1; i < mats.size(); ++i) {
    acc = kron(acc, mats[i]);
  }
  return acc;
}

Matrix normalize(const Matrix& b, NormMode mode) {
  if (mode == NormMode::None) {
    return b;
  }
  double total = 0.0;
  for (double v : b.data()) {
    total += mode == NormMode::L1 ? std::abs(v) : v * v;
  }
  if (total == 0.0) {
    throw ZeroMatrixError(std::string("normalize: ") + std::string(to_string(mode)) +
                          " normalization of an all-zero " + shape(b) + " matrix");
  }
  const double denom = mode == NormMode::L1 ? total : std::sqrt(total);
  return scale(b, 1.0 / denom);
}

Matrix crop(const Matrix& b, std::size_t rows, std::size_t cols) {
  if (rows > b.rows() || cols > b.cols()) {
    throw DimensionError("crop: requested " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " from " + shape(b));
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&b(r, 0), cols, &out(r, 0));
  }
  return out;
}

double span_residual(const Matrix& basis, std::span<const double> v) {
  if (basis.rows() != v.size()) {
    throw DimensionError("span_residual: basis has " + std::to_string(basis.rows()) +
                         " rows but vector has length " + std::to_string(v.size()));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> b(basis.data().data(),
                                     static_cast<Eigen::Index>(basis.rows()),
                                     static_cast<Eigen::Index>(basis.cols()));
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
  const Eigen::VectorXd rotated = qr.householderQ().adjoint() * x;
  const Eigen::Index rank = qr.rank();
  return rotated.tail(rotated.size() - rank).norm();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a) + " times " + shape(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = &out(i, 0);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      const double* src = &b(p, 0);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        dst[j] += aip * src[j];
      }
    }
  }
  return out;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw DimensionError("matvec: " + shape(a) + " times vector of length " +
                         std::to_string(x.size()));
  }
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    out[i] = dot(std::span<const double>(&a(i, 0), a.cols()), x);
  }
  return out;
}

std::vector<double> matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) {
    throw DimensionError("matvec_transposed: " + shape(a) + "^T times vector of length " +
                         std::to_string(x.size()));
  }
  std::vector<double> out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out[j] += a(i, j) * xi;
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(j, i) = a(i, j);
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: " + shape(a) + " plus " + shape(b));
  }
  Matrix out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += src[i];
  }
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("subtract: " + shape(a) + " minus " + shape(b));
  }
  Matrix out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] -= src[i];
  }
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out = a;
  for (double& v : out.data()) {
    v *= factor;
  }
  return out;
}

double frobenius_norm(const Matrix& a) { return l2_norm(a.data()); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("max_abs_diff: " + shape(a) + " vs " + shape(b));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) {
    acc += x * x;
  }
  return std::sqrt(acc);
}

}  // namespace ckctx
