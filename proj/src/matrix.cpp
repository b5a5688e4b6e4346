#include "pgrec/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pgrec/kernels.hpp"

namespace pgrec {

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  kernels::gemm_nn(a.data(), b.data(), c.data(), a.rows, a.cols, b.cols);
  return c;
}

Matrix transposed(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

SparseCsr SparseCsr::from_triplets(int rows, int cols, const std::vector<Triplet>& entries) {
  SparseCsr m(rows, cols);
  std::vector<Triplet> sorted = entries;
  for (const Triplet& t : sorted) {
    require(t.row >= 0 && t.row < rows && t.col >= 0 && t.col < cols,
            "SparseCsr: entry index out of range");
    require(std::isfinite(t.w), "SparseCsr: non-finite weight");
  }
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    require(sorted[i].row != sorted[i - 1].row || sorted[i].col != sorted[i - 1].col,
            "SparseCsr: duplicate (row, col) entry");
  m.col.resize(sorted.size());
  m.val.resize(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    m.row_ptr[sorted[i].row + 1]++;
    m.col[i] = sorted[i].col;
    m.val[i] = sorted[i].w;
  }
  for (int r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

SparseCsr SparseCsr::transposed() const {
  SparseCsr t(cols, rows);
  t.col.resize(nnz());
  t.val.resize(nnz());
  for (std::size_t e = 0; e < nnz(); ++e) t.row_ptr[col[e] + 1]++;
  for (int r = 0; r < cols; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  std::vector<int> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (int r = 0; r < rows; ++r) {
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const int pos = cursor[col[e]]++;
      t.col[pos] = r;
      t.val[pos] = val[e];
    }
  }
  return t;
}

bool SparseCsr::is_symmetric(double tol) const {
  if (rows != cols) return false;
  const SparseCsr t = transposed();
  if (t.col != col || t.row_ptr != row_ptr) return false;
  for (std::size_t e = 0; e < nnz(); ++e)
    if (std::fabs(t.val[e] - val[e]) > tol) return false;
  return true;
}

std::vector<double> SparseCsr::abs_row_sums() const {
  std::vector<double> d(rows, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e) d[r] += std::fabs(val[e]);
  return d;
}

Matrix SparseCsr::multiply(const Matrix& x) const {
  require(cols == x.rows, "SparseCsr::multiply: inner dimensions differ");
  Matrix y(rows, x.cols);
  kernels::csr_matmul(row_ptr.data(), col.data(), val.data(), rows, x.data(), x.cols, y.data());
  return y;
}

}  // namespace pgrec
