#include "pgrec/split.hpp"

#include <algorithm>
#include <unordered_set>

#include "pgrec/rng.hpp"

namespace pgrec {

std::vector<int> Split::test_users() const {
  std::vector<int> users;
  for (int u = 0; u < test.n_users; ++u)
    if (test.user_ptr[u + 1] > test.user_ptr[u]) users.push_back(u);
  return users;
}

Split weak_generalization_split(const RatingStore& store, int upl, int n_eval,
                                std::uint64_t seed) {
  require(upl >= 2, "weak_generalization_split: upl must be at least 2");
  require(n_eval >= 1, "weak_generalization_split: n_eval must be at least 1");

  Split out;
  out.upl = upl;
  out.n_eval = n_eval;
  out.seed = seed;
  for (RatingStore* s : {&out.train, &out.test}) {
    s->n_users = store.n_users;
    s->n_items = store.n_items;
    s->kmin = store.kmin;
    s->kmax = store.kmax;
    s->orig_user_ids = store.orig_user_ids;
    s->orig_item_ids = store.orig_item_ids;
  }

  Rng rng(derive_seed(seed, "split"));
  std::vector<std::vector<Rating>> test_of_user(store.n_users);
  for (int u = 0; u < store.n_users; ++u) {
    const auto mine = store.of_user(u);
    if (static_cast<int>(mine.size()) < upl + n_eval) continue;
    std::vector<Rating> pool(mine.begin(), mine.end());
    rng.shuffle(pool);
    for (int i = 0; i < upl; ++i) out.train.ratings.push_back(pool[i]);
    test_of_user[u].assign(pool.begin() + upl, pool.end());
  }
  require(!out.train.ratings.empty(), "weak_generalization_split: no user survives filtering");
  out.train.reindex();

  std::unordered_set<int> train_items;
  for (const Rating& r : out.train.ratings) train_items.insert(r.item);

  for (int u = 0; u < store.n_users; ++u) {
    auto& mine = test_of_user[u];
    if (mine.empty()) continue;
    mine.erase(std::remove_if(mine.begin(), mine.end(),
                              [&](const Rating& r) { return !train_items.count(r.item); }),
               mine.end());
    if (static_cast<int>(mine.size()) < n_eval) continue;
    out.test.ratings.insert(out.test.ratings.end(), mine.begin(), mine.end());
  }
  require(!out.test.ratings.empty(), "weak_generalization_split: no user survives filtering");
  out.test.reindex();
  return out;
}

RatingStore subsample_users(const RatingStore& store, int count, std::uint64_t seed,
                            std::vector<int>* kept_users) {
  require(count >= 1 && count <= store.n_users, "subsample_users: bad count");
  std::vector<int> users(store.n_users);
  for (int u = 0; u < store.n_users; ++u) users[u] = u;
  Rng rng(derive_seed(seed, "subsample"));
  rng.shuffle(users);
  users.resize(count);
  std::sort(users.begin(), users.end());
  if (kept_users) *kept_users = users;

  RatingStore out;
  out.n_users = count;
  out.n_items = store.n_items;
  out.kmin = store.kmin;
  out.kmax = store.kmax;
  out.orig_item_ids = store.orig_item_ids;
  out.orig_user_ids.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int u = users[i];
    out.orig_user_ids.push_back(store.orig_user_ids.empty() ? u : store.orig_user_ids[u]);
    for (const Rating& r : store.of_user(u)) out.ratings.push_back({i, r.item, r.value});
  }
  out.reindex();
  return out;
}

}  // namespace pgrec
