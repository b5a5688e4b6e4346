#pragma once

#include <cstdint>
#include <functional>

#include "pgrec/matrix.hpp"
#include "pgrec/movielens.hpp"

namespace pgrec {

// Non-negative factors of the observed rating matrix: R ~ user_factors *
// item_factors over the observed entries only.
struct Factorization {
  Matrix user_factors;  // n x f
  Matrix item_factors;  // f x m
  int rank = 0;
};

struct NmfOptions {
  int rank = 64;
  int max_iters = 200;
  double tol = 1e-4;  // stop when the relative loss improvement drops below
  std::uint64_t seed = 1;
  double denom_eps = 1e-9;
};

// Called after each multiplicative update pass with the observed squared
// loss; factors can be inspected mid-run.
using NmfObserver = std::function<void(int iter, double observed_loss, const Factorization&)>;

// Multiplicative updates restricted to observed positions; unknown entries
// never enter the objective. Initialization is uniform in (0, 1].
Factorization nmf_factorize(const RatingStore& train, const NmfOptions& options,
                            const NmfObserver& observer = nullptr);

// Observed-entry RMSE of a factorization against a store.
double observed_rmse(const Factorization& f, const RatingStore& store);

}  // namespace pgrec
