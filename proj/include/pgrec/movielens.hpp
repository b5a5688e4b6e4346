#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgrec/error.hpp"

namespace pgrec {

struct Rating {
  int user = 0;
  int item = 0;
  double value = 0.0;
};

// Sparse explicit feedback with a fixed rating scale [kmin, kmax]. Users and
// items are dense contiguous indices; original ids live in the side maps.
struct RatingStore {
  int n_users = 0;
  int n_items = 0;
  int kmin = 1;
  int kmax = 5;
  std::vector<Rating> ratings;  // sorted by (user, item), one per pair
  std::vector<int> user_ptr;    // n_users + 1 offsets into `ratings`
  std::vector<std::int64_t> orig_user_ids;
  std::vector<std::int64_t> orig_item_ids;

  std::size_t count() const { return ratings.size(); }
  std::span<const Rating> of_user(int u) const {
    return {ratings.data() + user_ptr[u], ratings.data() + user_ptr[u + 1]};
  }
  // Sorts ratings and rebuilds user_ptr; call after editing `ratings`.
  void reindex();
};

struct UserProfile {
  int user = 0;
  std::string age_category;
  std::string gender;
  std::string occupation;
};

struct ItemProfile {
  int item = 0;
  std::vector<std::string> genres;  // "unknown" when the source row has none
  std::string decade;               // empty when the release date is missing
};

enum class Flavor { kMl100k, kMl1m };
enum class DuplicatePolicy { kError, kKeepFirst };

struct Dataset {
  RatingStore store;
  std::vector<UserProfile> users;
  std::vector<ItemProfile> items;
  std::size_t duplicates_dropped = 0;
};

// Age in whole years to one of five bands:
//   <18 teenager, 18-24 young, 25-34 adult, 35-49 middle-aged, >=50 senior.
std::string categorize_age(int age);

// Release year to its decade label ("90s" for 1990-1999, "2000s" from 2000).
std::string categorize_decade(int year);

// Reads the dataset from its native layout: ML-100K (u.data / u.user /
// u.item, pipe-separated side files) or ML-1M ("::"-separated .dat files).
// Timestamps are read and discarded. Duplicate (user, item) pairs follow
// `policy`: error out, or keep the first occurrence and count the rest.
Dataset parse_movielens(const std::string& dir, Flavor flavor,
                        DuplicatePolicy policy = DuplicatePolicy::kError);

Flavor flavor_from_name(const std::string& name);

}  // namespace pgrec
