#pragma once

#include "pgrec/matrix.hpp"

namespace pgrec {

// One convolution layer: mixing weights theta and the self-loop weight beta.
struct PropagationLayer {
  Matrix theta;  // in-width x out-width
  double beta = 1.0;
};

// Dtilde^{-1/2} (W + beta I) Dtilde^{-1/2} with Dtilde_ii the absolute row
// sum of W + beta I. The result contains the diagonal explicitly.
SparseCsr normalized_operator(const SparseCsr& weights, double beta);

// rectifier(normalized_operator(weights, beta) * signals * theta). Bipartite
// graphs are embedded as block off-diagonal weights over the union node set.
Matrix propagate(const SparseCsr& weights, const Matrix& signals, const PropagationLayer& layer);

// Default self-loop rule: one more than the largest absolute edge weight.
double default_beta(const SparseCsr& weights);

}  // namespace pgrec
