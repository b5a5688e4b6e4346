#pragma once

#include <cstdint>

#include "pgrec/movielens.hpp"

namespace pgrec {

// Weak-generalization split: every evaluated user keeps exactly `upl` train
// ratings and at least `n_eval` test ratings.
struct Split {
  RatingStore train;
  RatingStore test;
  int upl = 0;
  int n_eval = 0;
  std::uint64_t seed = 0;

  // Users that take part in evaluation (>= n_eval test ratings each).
  std::vector<int> test_users() const;
};

// Users with fewer than upl + n_eval ratings are removed; each survivor gets
// exactly `upl` uniformly sampled train ratings, the rest become test; test
// ratings on items missing from the train item set are dropped; users left
// with fewer than n_eval test ratings are dropped from the test side (their
// train ratings stay). Throws when no user survives.
Split weak_generalization_split(const RatingStore& store, int upl, int n_eval,
                                std::uint64_t seed);

// Uniformly sampled user subset with dense user re-indexing; the item space
// is unchanged. Also returns the kept original user indices so side
// information can be remapped.
RatingStore subsample_users(const RatingStore& store, int count, std::uint64_t seed,
                            std::vector<int>* kept_users = nullptr);

}  // namespace pgrec
