#pragma once

#include <vector>

#include "pgrec/similarity.hpp"

namespace pgrec {

struct ClusterAssignment {
  std::vector<int> label;  // contiguous 0..cluster_count-1, every node labeled
  int cluster_count = 0;
  // False when every remaining cluster became unsplittable before reaching
  // the requested count.
  bool reached_target = true;
};

// Recursive two-way spectral clustering: connected components seed the
// clusters; the largest cluster is repeatedly bipartitioned by the sign of
// its Fiedler vector (v > 0 against v <= 0) until `c` clusters exist.
// Clusters that cannot be split (singletons, no internal edges, degenerate
// sign patterns, eigensolver failure) are skipped; when none remain the
// current assignment is returned with reached_target = false.
ClusterAssignment recursive_spectral_clustering(const SimilarityGraph& graph, int c);

// Keeps exactly the edges whose endpoints share a cluster label.
SimilarityGraph sparsify(const SimilarityGraph& graph, const ClusterAssignment& clusters);

}  // namespace pgrec
