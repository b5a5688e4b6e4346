#include "pgrec/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "pgrec/eigensolver.hpp"

namespace pgrec {

namespace {

struct Adjacency {
  std::vector<std::vector<std::pair<int, double>>> nbrs;

  explicit Adjacency(const SimilarityGraph& g) : nbrs(g.node_count) {
    for (const auto& e : g.edges) {
      nbrs[e.a].emplace_back(e.b, e.w);
      nbrs[e.b].emplace_back(e.a, e.w);
    }
  }
};

std::vector<std::vector<int>> connected_components(const Adjacency& adj, int n) {
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int c = static_cast<int>(out.size());
    out.emplace_back();
    stack.push_back(s);
    comp[s] = c;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      out[c].push_back(v);
      for (const auto& [w, _] : adj.nbrs[v])
        if (comp[w] < 0) {
          comp[w] = c;
          stack.push_back(w);
        }
    }
    std::sort(out[c].begin(), out[c].end());
  }
  return out;
}

// Fiedler-sign bipartition of one cluster; false when the split is
// degenerate or the eigensolver gives up.
bool split_cluster(const Adjacency& adj, const std::vector<int>& members,
                   std::vector<int>& side1, std::vector<int>& side2) {
  const int s = static_cast<int>(members.size());
  if (s < 2) return false;
  std::vector<int> local(adj.nbrs.size(), -1);
  for (int i = 0; i < s; ++i) local[members[i]] = i;

  std::vector<Triplet> tri;
  std::vector<double> degree(s, 0.0);
  for (int i = 0; i < s; ++i)
    for (const auto& [w, weight] : adj.nbrs[members[i]]) {
      const int j = local[w];
      if (j < 0) continue;
      tri.push_back({i, j, -weight});
      degree[i] += weight;
    }
  if (tri.empty()) return false;  // no internal edges
  for (int i = 0; i < s; ++i) tri.push_back({i, i, degree[i]});

  FiedlerResult fiedler;
  try {
    fiedler = fiedler_vector(SparseCsr::from_triplets(s, s, tri), 1e-8);
  } catch (const Error&) {
    return false;
  }

  // Canonical sign: the largest-magnitude component is positive, so the
  // partition does not depend on the eigensolver's sign choice.
  int arg = 0;
  for (int i = 1; i < s; ++i)
    if (std::fabs(fiedler.vector[i]) > std::fabs(fiedler.vector[arg])) arg = i;
  const double flip = fiedler.vector[arg] < 0.0 ? -1.0 : 1.0;

  side1.clear();
  side2.clear();
  for (int i = 0; i < s; ++i)
    (flip * fiedler.vector[i] > 0.0 ? side1 : side2).push_back(members[i]);
  return !side1.empty() && !side2.empty();
}

}  // namespace

ClusterAssignment recursive_spectral_clustering(const SimilarityGraph& graph, int c) {
  const int n = graph.node_count;
  require(c >= 1, "recursive_spectral_clustering: c must be at least 1");
  require(c <= n, "recursive_spectral_clustering: c exceeds the node count");

  const Adjacency adj(graph);
  std::vector<std::vector<int>> clusters;
  if (c == 1) {
    clusters.emplace_back();
    for (int v = 0; v < n; ++v) clusters[0].push_back(v);
  } else {
    clusters = connected_components(adj, n);
  }

  std::vector<char> unsplittable(clusters.size(), 0);
  bool reached = true;
  while (static_cast<int>(clusters.size()) < c) {
    // Largest splittable cluster; ties broken by the smallest label.
    int pick = -1;
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      if (unsplittable[k]) continue;
      if (pick < 0 || clusters[k].size() > clusters[pick].size()) pick = static_cast<int>(k);
    }
    if (pick < 0) {
      std::cerr << "recursive_spectral_clustering: only " << clusters.size() << " of " << c
                << " clusters reachable; stopping early\n";
      reached = false;
      break;
    }
    std::vector<int> side1, side2;
    if (!split_cluster(adj, clusters[pick], side1, side2)) {
      unsplittable[pick] = 1;
      continue;
    }
    clusters[pick] = std::move(side1);
    clusters.push_back(std::move(side2));
    unsplittable[pick] = 0;
    unsplittable.push_back(0);
  }

  // Contiguous labels, ordered by each cluster's smallest node.
  std::vector<int> order(clusters.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return clusters[a].front() < clusters[b].front(); });

  ClusterAssignment out;
  out.label.assign(n, -1);
  out.cluster_count = static_cast<int>(clusters.size());
  out.reached_target = reached;
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    for (int v : clusters[order[rank]]) out.label[v] = static_cast<int>(rank);
  return out;
}

SimilarityGraph sparsify(const SimilarityGraph& graph, const ClusterAssignment& clusters) {
  require(static_cast<int>(clusters.label.size()) == graph.node_count,
          "sparsify: assignment does not cover the graph");
  for (int v = 0; v < graph.node_count; ++v)
    require(clusters.label[v] >= 0 && clusters.label[v] < clusters.cluster_count,
            "sparsify: node " + std::to_string(v) + " missing from the assignment");
  SimilarityGraph out;
  out.kind = graph.kind;
  out.node_count = graph.node_count;
  for (const auto& e : graph.edges)
    if (clusters.label[e.a] == clusters.label[e.b]) out.edges.push_back(e);
  return out;
}

}  // namespace pgrec
