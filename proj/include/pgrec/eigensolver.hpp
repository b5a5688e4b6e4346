#pragma once

#include <utility>
#include <vector>

#include "pgrec/matrix.hpp"

namespace pgrec {

struct FiedlerResult {
  double lambda2 = 0.0;
  std::vector<double> vector;  // unit norm, orthogonal to the constant vector
  int iterations = 0;
};

// Second-smallest eigenpair of a symmetric graph Laplacian. Lanczos with
// full reorthogonalization, run in the subspace orthogonal to the constant
// vector (the Laplacian's trivial kernel direction). The eigenvector sign is
// unconstrained. Throws on a non-symmetric input or when the iteration cap
// is reached before the residual drops below tol.
FiedlerResult fiedler_vector(const SparseCsr& laplacian, double tol = 1e-9,
                             int max_iters = 0 /* 0 = automatic */);

// Laplacian D - W from symmetric weights (no diagonal expected in `weights`).
SparseCsr laplacian_from_weights(const SparseCsr& weights);

}  // namespace pgrec
