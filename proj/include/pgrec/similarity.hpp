#pragma once

#include <vector>

#include "pgrec/matrix.hpp"
#include "pgrec/movielens.hpp"
#include "pgrec/prefgraph.hpp"

namespace pgrec {

// Weighted undirected intra-type graph (user-user or item-item). Each edge
// is stored once with a < b; weights are path/overlap counts (>= 1).
struct SimilarityGraph {
  struct Edge {
    int a;
    int b;
    double w;
  };

  NodeKind kind = NodeKind::kUser;
  int node_count = 0;
  std::vector<Edge> edges;

  static SimilarityGraph empty(NodeKind kind, int node_count) {
    return SimilarityGraph{kind, node_count, {}};
  }

  // Symmetric CSR with both directions and no diagonal.
  SparseCsr to_csr() const;
  double max_weight() const;
};

// Edge weight = number of shared content attribute nodes between two users
// (age band, gender, occupation each count one).
SimilarityGraph build_content_similarity(const std::vector<UserProfile>& profiles, int n_users);
// Edge weight = number of shared content attribute nodes between two items
// (each genre and the release decade count one).
SimilarityGraph build_content_similarity(const std::vector<ItemProfile>& profiles, int n_items);

// Edge weight = co-rating overlap from the train store: |I_u ∩ I_v| for
// users, |U_i ∩ U_j| for items. Zero-overlap pairs get no edge.
SimilarityGraph build_corating_similarity(const RatingStore& train, NodeKind kind);

}  // namespace pgrec
