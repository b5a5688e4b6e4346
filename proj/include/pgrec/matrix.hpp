#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pgrec/error.hpp"

namespace pgrec {

// Dense row-major matrix of doubles. A 1xN (or Nx1) matrix doubles as a
// vector; scalars are 1x1.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {
    require(r >= 0 && c >= 0, "Matrix: negative shape");
  }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix full(int r, int c, double x) {
    Matrix m(r, c);
    std::fill(m.v.begin(), m.v.end(), x);
    return m;
  }

  std::size_t size() const { return v.size(); }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transposed(const Matrix& a);

struct Triplet {
  int row = 0;
  int col = 0;
  double w = 0.0;
};

// Compressed sparse row matrix. Builders reject duplicate (row, col) entries
// and out-of-range indices; column indices are sorted within each row.
struct SparseCsr {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // rows + 1
  std::vector<int> col;
  std::vector<double> val;

  SparseCsr() : row_ptr(1, 0) {}
  SparseCsr(int r, int c) : rows(r), cols(c), row_ptr(static_cast<std::size_t>(r) + 1, 0) {}

  static SparseCsr from_triplets(int rows, int cols, const std::vector<Triplet>& entries);

  std::size_t nnz() const { return col.size(); }
  SparseCsr transposed() const;
  bool is_symmetric(double tol) const;

  // Row sums of absolute values.
  std::vector<double> abs_row_sums() const;

  // y = this * x (dense), y allocated by the caller as rows x x.cols zeroed,
  // or use the returning overload.
  Matrix multiply(const Matrix& x) const;
};

}  // namespace pgrec
