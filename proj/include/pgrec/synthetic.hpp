#pragma once

#include <cstdint>
#include <string>

namespace pgrec {

// Parameters for a generated explicit-feedback dataset written in the
// ML-100K file layout (u.data / u.user / u.item). Ratings come from a latent
// factor model whose item factors are partially determined by genre/decade
// and whose user factors are partially determined by demographics, so side
// information carries real signal.
struct SyntheticSpec {
  int users = 943;
  int items = 1682;
  long long rows = 100000;   // rating rows written, including duplicates
  int duplicate_rows = 8;    // extra rows repeating an earlier (user, item)
  int min_ratings = 20;
  std::uint64_t seed = 20250808;
};

// Writes the three files into `dir` (created if needed). Deterministic for a
// fixed spec.
void write_synthetic_dataset(const std::string& dir, const SyntheticSpec& spec);

// 30-user miniature used by the smoke config and quick tests.
SyntheticSpec mini_spec();

// ML-100K-scale stand-in: 943 users, 1682 items, 100000 rows of which 8 are
// duplicated pairs (99992 unique ratings).
SyntheticSpec standin_spec();

}  // namespace pgrec
