#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pgrec/movielens.hpp"

namespace pgrec {

enum class NodeKind { kUser, kItem, kPreference, kContent };

struct NodeId {
  NodeKind kind;
  int index;
};

// Heterogeneous preference graph: user, item, preference and (optionally)
// content nodes. A preference node stands for the comparison of one item
// pair {i, j}, stored canonically with i < j; it is incident to item i with
// weight +1 and to item j with weight -1. A user who rated both attaches
// with weight r_ui - r_uj.
struct PrefGraph {
  int n_users = 0;
  int n_items = 0;
  int kmin = 1;
  int kmax = 5;
  bool with_content = false;

  std::vector<std::pair<int, int>> pref_pair;  // canonical (i, j), i < j

  // user -> preference edges (CSR by user)
  std::vector<int> user_ptr;
  std::vector<int> edge_pref;
  std::vector<double> edge_weight;

  // preference -> user edges (transpose CSR)
  std::vector<int> pref_ptr;
  std::vector<int> pedge_user;
  std::vector<double> pedge_weight;

  // user -> item rating edges (copied from the train store)
  std::vector<int> ui_ptr;
  std::vector<int> ui_item;
  std::vector<double> ui_rating;

  // content incidences (unweighted), present when with_content
  std::vector<std::string> content_names;
  std::vector<std::vector<int>> user_content;  // per user, content node ids
  std::vector<std::vector<int>> item_content;

  int pref_count() const { return static_cast<int>(pref_pair.size()); }
  int user_pref_degree(int u) const { return user_ptr[u + 1] - user_ptr[u]; }
  // +1 when `item` is the canonical first of pair p, -1 when the second,
  // 0 when not incident.
  int pref_item_weight(int p, int item) const {
    if (pref_pair[p].first == item) return 1;
    if (pref_pair[p].second == item) return -1;
    return 0;
  }
  // Preference node id for an unordered item pair, or -1.
  int find_pref(int item_a, int item_b) const;

  std::unordered_map<std::int64_t, int> pref_lookup;  // (min*n_items+max) -> id
};

// One global preference node per unordered co-rated pair. Tie pairs
// (equal ratings, weight 0) are kept unless include_ties is false.
PrefGraph build_pref_graph(const RatingStore& train, const std::vector<UserProfile>& users,
                           const std::vector<ItemProfile>& items, bool with_content,
                           bool include_ties = true);

// Debug edge list: "<kind> <index> <kind> <index> <weight>" per line.
void dump_edge_list(const PrefGraph& g, std::ostream& out);

}  // namespace pgrec
