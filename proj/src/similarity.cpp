#include "pgrec/similarity.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>

namespace pgrec {

namespace {

// Pairwise shared-attribute counting via a dense upper triangle; n stays in
// the thousands for the supported datasets.
class PairCounts {
 public:
  explicit PairCounts(int n) : n_(n), counts_(static_cast<std::size_t>(n) * (n - 1) / 2, 0) {}

  void bump(int a, int b) { counts_[index(a, b)]++; }

  SimilarityGraph to_graph(NodeKind kind) const {
    SimilarityGraph g;
    g.kind = kind;
    g.node_count = n_;
    for (int a = 0; a < n_; ++a) {
      const std::size_t base = row_base(a);
      for (int b = a + 1; b < n_; ++b) {
        const std::uint32_t c = counts_[base + (b - a - 1)];
        if (c > 0) g.edges.push_back({a, b, static_cast<double>(c)});
      }
    }
    return g;
  }

 private:
  std::size_t row_base(int a) const {
    // offset of pair (a, a+1)
    return static_cast<std::size_t>(a) * n_ - static_cast<std::size_t>(a) * (a + 1) / 2;
  }
  std::size_t index(int a, int b) const { return row_base(a) + (b - a - 1); }

  int n_;
  std::vector<std::uint32_t> counts_;
};

void bump_group(PairCounts& counts, const std::vector<int>& members) {
  for (std::size_t x = 0; x < members.size(); ++x)
    for (std::size_t y = x + 1; y < members.size(); ++y) counts.bump(members[x], members[y]);
}

}  // namespace

SparseCsr SimilarityGraph::to_csr() const {
  std::vector<Triplet> tri;
  tri.reserve(edges.size() * 2);
  for (const Edge& e : edges) {
    tri.push_back({e.a, e.b, e.w});
    tri.push_back({e.b, e.a, e.w});
  }
  return SparseCsr::from_triplets(node_count, node_count, tri);
}

double SimilarityGraph::max_weight() const {
  double m = 0.0;
  for (const Edge& e : edges) m = std::max(m, e.w);
  return m;
}

SimilarityGraph build_content_similarity(const std::vector<UserProfile>& profiles, int n_users) {
  require(!profiles.empty(), "build_content_similarity: no profiles");
  std::unordered_map<std::string, std::vector<int>> attribute_members;
  for (const UserProfile& p : profiles) {
    if (p.user < 0 || p.user >= n_users) continue;
    if (!p.age_category.empty()) attribute_members["age:" + p.age_category].push_back(p.user);
    if (!p.gender.empty()) attribute_members["gender:" + p.gender].push_back(p.user);
    if (!p.occupation.empty()) attribute_members["occupation:" + p.occupation].push_back(p.user);
  }
  PairCounts counts(n_users);
  for (const auto& [_, members] : attribute_members) bump_group(counts, members);
  return counts.to_graph(NodeKind::kUser);
}

SimilarityGraph build_content_similarity(const std::vector<ItemProfile>& profiles, int n_items) {
  require(!profiles.empty(), "build_content_similarity: no profiles");
  std::unordered_map<std::string, std::vector<int>> attribute_members;
  for (const ItemProfile& p : profiles) {
    if (p.item < 0 || p.item >= n_items) continue;
    for (const std::string& g : p.genres) attribute_members["genre:" + g].push_back(p.item);
    if (!p.decade.empty()) attribute_members["decade:" + p.decade].push_back(p.item);
  }
  PairCounts counts(n_items);
  for (const auto& [_, members] : attribute_members) bump_group(counts, members);
  return counts.to_graph(NodeKind::kItem);
}

SimilarityGraph build_corating_similarity(const RatingStore& train, NodeKind kind) {
  require(!train.ratings.empty(), "build_corating_similarity: empty train store");
  require(kind == NodeKind::kUser || kind == NodeKind::kItem,
          "build_corating_similarity: kind must be user or item");
  if (kind == NodeKind::kUser) {
    // Users sharing an item: group users by item.
    std::vector<std::vector<int>> raters(train.n_items);
    for (const Rating& r : train.ratings) raters[r.item].push_back(r.user);
    PairCounts counts(train.n_users);
    for (const auto& members : raters) bump_group(counts, members);
    return counts.to_graph(NodeKind::kUser);
  }
  PairCounts counts(train.n_items);
  std::vector<int> items;
  for (int u = 0; u < train.n_users; ++u) {
    items.clear();
    for (const Rating& r : train.of_user(u)) items.push_back(r.item);
    bump_group(counts, items);
  }
  return counts.to_graph(NodeKind::kItem);
}

}  // namespace pgrec
