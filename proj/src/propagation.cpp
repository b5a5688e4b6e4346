#include "pgrec/propagation.hpp"

#include <cmath>

#include "pgrec/kernels.hpp"

namespace pgrec {

double default_beta(const SparseCsr& weights) {
  double max_abs = 0.0;
  for (double w : weights.val) max_abs = std::max(max_abs, std::fabs(w));
  return 1.0 + max_abs;
}

SparseCsr normalized_operator(const SparseCsr& weights, double beta) {
  require(weights.rows == weights.cols, "normalized_operator: matrix not square");
  require(beta > 0.0, "normalized_operator: beta must be positive");
  const int n = weights.rows;

  // W + beta I, merging beta into an existing diagonal entry if present.
  std::vector<Triplet> tri;
  tri.reserve(weights.nnz() + n);
  std::vector<char> has_diag(n, 0);
  for (int r = 0; r < n; ++r)
    for (int e = weights.row_ptr[r]; e < weights.row_ptr[r + 1]; ++e) {
      double w = weights.val[e];
      if (weights.col[e] == r) {
        w += beta;
        has_diag[r] = 1;
      }
      tri.push_back({r, weights.col[e], w});
    }
  for (int r = 0; r < n; ++r)
    if (!has_diag[r]) tri.push_back({r, r, beta});

  SparseCsr tilde = SparseCsr::from_triplets(n, n, tri);
  const std::vector<double> degree = tilde.abs_row_sums();
  std::vector<double> inv_sqrt(n);
  for (int r = 0; r < n; ++r) {
    require(degree[r] > 0.0, "normalized_operator: zero degree row");
    inv_sqrt[r] = 1.0 / std::sqrt(degree[r]);
  }
  for (int r = 0; r < n; ++r)
    for (int e = tilde.row_ptr[r]; e < tilde.row_ptr[r + 1]; ++e)
      tilde.val[e] *= inv_sqrt[r] * inv_sqrt[tilde.col[e]];
  return tilde;
}

Matrix propagate(const SparseCsr& weights, const Matrix& signals, const PropagationLayer& layer) {
  require(signals.rows == weights.rows, "propagate: signal row count differs from node count");
  require(layer.theta.rows == signals.cols, "propagate: theta input width mismatch");
  const SparseCsr op = normalized_operator(weights, layer.beta);
  const Matrix mixed = op.multiply(signals);
  Matrix out(mixed.rows, layer.theta.cols);
  kernels::gemm_nn(mixed.data(), layer.theta.data(), out.data(), mixed.rows, mixed.cols,
                   layer.theta.cols);
  kernels::relu(out.data(), out.data(), out.size());
  return out;
}

}  // namespace pgrec
