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

#ifndef CKCTX_LINALG_HPP
#define CKCTX_LINALG_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace ckctx {

/// Dense row-major matrix of doubles.
///
/// A default-constructed matrix is 0x0 and acts as "absent" where an
/// operation takes an optional operand; every public operation otherwise
/// requires positive dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Literal construction, one inner list per row.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  /// n x 1 column vector.
  static Matrix column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class NormMode { None, L1, L2 };

std::string_view to_string(NormMode mode);
/// Accepts "none", "l1", "l2" (case-insensitive).
NormMode parse_norm_mode(std::string_view text);

/// Kronecker product; entry (i*b.rows + r, j*b.cols + c) is a(i,j) * b(r,c).
Matrix kron(const Matrix& a, const Matrix& b);

/// Left fold of kron over a non-empty sequence.
Matrix kron_chain(std::span<const Matrix> mats);

/// Whole-matrix normalization (vectorized L1 or L2, not per column).
Matrix normalize(const Matrix& b, NormMode mode);

/// Leading rows x cols block.
Matrix crop(const Matrix& b, std::size_t rows, std::size_t cols);

/// Distance from v to the column span of basis.
double span_residual(const Matrix& basis, std::span<const double> v);

Matrix matmul(const Matrix& a, const Matrix& b);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
/// a^T x without forming the transpose.
std::vector<double> matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

}  // namespace ckctx

#endif  // CKCTX_LINALG_HPP
