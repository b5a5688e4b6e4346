#include "pgrec/prefgraph.hpp"

#include <algorithm>
#include <ostream>

namespace pgrec {

int PrefGraph::find_pref(int item_a, int item_b) const {
  const int lo = std::min(item_a, item_b);
  const int hi = std::max(item_a, item_b);
  const auto it = pref_lookup.find(static_cast<std::int64_t>(lo) * n_items + hi);
  return it == pref_lookup.end() ? -1 : it->second;
}

PrefGraph build_pref_graph(const RatingStore& train, const std::vector<UserProfile>& users,
                           const std::vector<ItemProfile>& items, bool with_content,
                           bool include_ties) {
  require(!train.ratings.empty(), "build_pref_graph: empty train store");
  PrefGraph g;
  g.n_users = train.n_users;
  g.n_items = train.n_items;
  g.kmin = train.kmin;
  g.kmax = train.kmax;
  g.with_content = with_content;

  g.ui_ptr.assign(train.user_ptr.begin(), train.user_ptr.end());
  g.ui_item.reserve(train.count());
  g.ui_rating.reserve(train.count());
  for (const Rating& r : train.ratings) {
    g.ui_item.push_back(r.item);
    g.ui_rating.push_back(r.value);
  }

  g.user_ptr.assign(g.n_users + 1, 0);
  for (int u = 0; u < g.n_users; ++u) {
    const auto mine = train.of_user(u);
    for (std::size_t a = 0; a < mine.size(); ++a)
      for (std::size_t b = a + 1; b < mine.size(); ++b) {
        // of_user is item-sorted, so (a, b) is already canonical.
        const double w = mine[a].value - mine[b].value;
        if (w == 0.0 && !include_ties) continue;
        const std::int64_t key =
            static_cast<std::int64_t>(mine[a].item) * g.n_items + mine[b].item;
        auto [it, inserted] = g.pref_lookup.try_emplace(key, g.pref_count());
        if (inserted) g.pref_pair.emplace_back(mine[a].item, mine[b].item);
        g.edge_pref.push_back(it->second);
        g.edge_weight.push_back(w);
        g.user_ptr[u + 1]++;
      }
  }
  for (int u = 0; u < g.n_users; ++u) g.user_ptr[u + 1] += g.user_ptr[u];

  // transpose CSR
  g.pref_ptr.assign(g.pref_count() + 1, 0);
  for (int p : g.edge_pref) g.pref_ptr[p + 1]++;
  for (int p = 0; p < g.pref_count(); ++p) g.pref_ptr[p + 1] += g.pref_ptr[p];
  g.pedge_user.resize(g.edge_pref.size());
  g.pedge_weight.resize(g.edge_pref.size());
  std::vector<int> cursor(g.pref_ptr.begin(), g.pref_ptr.end() - 1);
  for (int u = 0; u < g.n_users; ++u)
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
      const int pos = cursor[g.edge_pref[e]]++;
      g.pedge_user[pos] = u;
      g.pedge_weight[pos] = g.edge_weight[e];
    }

  if (with_content) {
    std::unordered_map<std::string, int> content_index;
    auto content_id = [&](const std::string& name) {
      auto [it, inserted] = content_index.try_emplace(name, static_cast<int>(g.content_names.size()));
      if (inserted) g.content_names.push_back(name);
      return it->second;
    };
    g.user_content.resize(g.n_users);
    g.item_content.resize(g.n_items);
    for (const UserProfile& p : users) {
      if (p.user < 0 || p.user >= g.n_users) continue;
      auto& mine = g.user_content[p.user];
      if (!p.age_category.empty()) mine.push_back(content_id("age:" + p.age_category));
      if (!p.gender.empty()) mine.push_back(content_id("gender:" + p.gender));
      if (!p.occupation.empty()) mine.push_back(content_id("occupation:" + p.occupation));
    }
    for (const ItemProfile& p : items) {
      if (p.item < 0 || p.item >= g.n_items) continue;
      auto& mine = g.item_content[p.item];
      for (const std::string& genre : p.genres) mine.push_back(content_id("genre:" + genre));
      if (!p.decade.empty()) mine.push_back(content_id("decade:" + p.decade));
    }
  }
  return g;
}

void dump_edge_list(const PrefGraph& g, std::ostream& out) {
  for (int u = 0; u < g.n_users; ++u)
    for (int e = g.ui_ptr[u]; e < g.ui_ptr[u + 1]; ++e)
      out << "user " << u << " item " << g.ui_item[e] << ' ' << g.ui_rating[e] << '\n';
  for (int p = 0; p < g.pref_count(); ++p) {
    out << "pref " << p << " item " << g.pref_pair[p].first << " 1\n";
    out << "pref " << p << " item " << g.pref_pair[p].second << " -1\n";
  }
  for (int u = 0; u < g.n_users; ++u)
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e)
      out << "user " << u << " pref " << g.edge_pref[e] << ' ' << g.edge_weight[e] << '\n';
  if (g.with_content) {
    for (int u = 0; u < g.n_users; ++u)
      for (int c : g.user_content[u]) out << "user " << u << " content " << c << " 1\n";
    for (int i = 0; i < g.n_items; ++i)
      for (int c : g.item_content[i]) out << "item " << i << " content " << c << " 1\n";
  }
}

}  // namespace pgrec
