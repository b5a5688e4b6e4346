#include <doctest.h>

#include <cmath>

#include "pgrec/nmf.hpp"
#include "pgrec/ranking.hpp"
#include "pgrec/rng.hpp"

using namespace pgrec;

namespace {

RatingStore store_from(int n_users, int n_items, const std::vector<Rating>& ratings) {
  RatingStore s;
  s.n_users = n_users;
  s.n_items = n_items;
  s.ratings = ratings;
  s.reindex();
  return s;
}

double ndcg_with_base(const std::vector<int>& rec,
                      const std::vector<std::pair<int, double>>& test, int n, double base) {
  auto log_base = [&](double x) { return std::log(x) / std::log(base); };
  double dcg = 0;
  for (int pos = 1; pos <= n && pos <= static_cast<int>(rec.size()); ++pos) {
    double g = 0;
    for (const auto& [item, rating] : test)
      if (item == rec[pos - 1]) g = rating;
    dcg += (std::pow(2.0, g) - 1.0) / log_base(pos + 1);
  }
  std::vector<double> ideal;
  for (const auto& [_, rating] : test) ideal.push_back(rating);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0;
  for (int pos = 1; pos <= n && pos <= static_cast<int>(ideal.size()); ++pos)
    idcg += (std::pow(2.0, ideal[pos - 1]) - 1.0) / log_base(pos + 1);
  return idcg > 0 ? dcg / idcg : 0.0;
}

// A scorer-backed fixture small enough for exhaustive checks.
struct Pipeline {
  RatingStore train;
  PrefGraph graph;
  Factorization fac;
  TrainConfig cfg;

  Pipeline()
      : train(store_from(4, 6,
                         {{0, 0, 5}, {0, 1, 3}, {0, 2, 4}, {0, 3, 1}, {1, 0, 2}, {1, 2, 5},
                          {1, 4, 4}, {2, 1, 4}, {2, 3, 4}, {2, 5, 2}, {3, 0, 3}, {3, 4, 2},
                          {3, 5, 5}})),
        graph(build_pref_graph(train, {}, {}, false)) {
    NmfOptions opt;
    opt.rank = 4;
    opt.max_iters = 30;
    fac = nmf_factorize(train, opt);
    cfg.dims = {4, 4, 4, 2};
    cfg.epochs = 0;
    cfg.pretrain = false;
    cfg.dropout_mid = cfg.dropout_last = 0.0;
    cfg.seed = 9;
  }
};

}  // namespace

TEST_CASE("perfect ranking scores exactly one") {
  const std::vector<std::pair<int, double>> test{{1, 5}, {2, 3}, {3, 4}};
  CHECK(ndcg_at_n({1, 3, 2}, test, 3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ndcg_at_n({1, 3, 2}, test, 10) == doctest::Approx(1.0).epsilon(1e-15));
}

// Gains {5, 3} with the 3 ranked first: DCG = 7 + 31/log2(3),
// IDCG = 31 + 7/log2(3), ratio ~ 0.7499.
TEST_CASE("two-item swap matches the hand computation") {
  const std::vector<std::pair<int, double>> test{{10, 5}, {20, 3}};
  const double dcg = 7.0 + 31.0 / std::log2(3.0);
  const double idcg = 31.0 + 7.0 / std::log2(3.0);
  CHECK(ndcg_at_n({20, 10}, test, 2) == doctest::Approx(dcg / idcg).epsilon(1e-12));
  CHECK(dcg / idcg == doctest::Approx(0.7499).epsilon(1e-3));
}

TEST_CASE("single-position ideal gives one at n = 1") {
  const std::vector<std::pair<int, double>> test{{4, 5}, {7, 2}};
  CHECK(ndcg_at_n({4}, test, 1) == doctest::Approx(1.0));
  CHECK(ndcg_at_n({7}, test, 1) < 1.0);
}

TEST_CASE("ndcg is total: unknown items gain zero, empty test set scores zero") {
  const std::vector<std::pair<int, double>> test{{1, 4}};
  CHECK(ndcg_at_n({2, 3, 1}, test, 2) == 0.0);  // both recommended unknown
  CHECK(ndcg_at_n({2, 1}, test, 2) ==
        doctest::Approx((std::pow(2.0, 4.0) - 1) / std::log2(3.0) / (std::pow(2.0, 4.0) - 1)));
  CHECK(ndcg_at_n({1}, {}, 3) == 0.0);
  CHECK_THROWS_AS(ndcg_at_n({1}, test, 0), Error);
}

TEST_CASE("ndcg is in [0, 1] and base-invariant on random instances") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const int n_items = 3 + static_cast<int>(rng.next_below(10));
    std::vector<std::pair<int, double>> test;
    for (int i = 0; i < n_items; ++i)
      test.emplace_back(i, static_cast<double>(1 + rng.next_below(5)));
    std::vector<int> rec;
    for (int i = 0; i < n_items; ++i) rec.push_back(i);
    rng.shuffle(rec);
    const int n = 1 + static_cast<int>(rng.next_below(10));
    const double v = ndcg_at_n(rec, test, n);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
    CHECK(v == doctest::Approx(ndcg_with_base(rec, test, n, std::exp(1.0))).epsilon(1e-12));
  }
}

TEST_CASE("swapping a lower-gain item earlier strictly increases ndcg") {
  Rng rng(72);
  int checked = 0;
  while (checked < 1000) {
    const int n_items = 4 + static_cast<int>(rng.next_below(8));
    std::vector<std::pair<int, double>> test;
    for (int i = 0; i < n_items; ++i)
      test.emplace_back(i, static_cast<double>(1 + rng.next_below(5)));
    std::vector<int> rec;
    for (int i = 0; i < n_items; ++i) rec.push_back(i);
    rng.shuffle(rec);
    const int pos = static_cast<int>(rng.next_below(n_items - 1));
    const double g1 = test[rec[pos]].second;
    const double g2 = test[rec[pos + 1]].second;
    if (g1 >= g2) continue;  // need earlier strictly lower
    std::vector<int> swapped = rec;
    std::swap(swapped[pos], swapped[pos + 1]);
    CHECK(ndcg_at_n(swapped, test, n_items) > ndcg_at_n(rec, test, n_items));
    ++checked;
  }
}

TEST_CASE("top-n ordering and tie-breaking") {
  ScoreRow row;
  row.items = {7, 3, 9, 1};
  row.scores = {0.5, 0.9, 0.5, -0.2};
  CHECK(recommend_top_n(row, 4) == std::vector<int>{3, 7, 9, 1});  // tie 7 vs 9 by index
  CHECK(recommend_top_n(row, 2) == std::vector<int>{3, 7});
  CHECK(recommend_top_n(row, 10) == std::vector<int>{3, 7, 9, 1});
  CHECK_THROWS_AS(recommend_top_n(row, 0), Error);
}

TEST_CASE("score_items matches a direct preference-sum evaluation") {
  Pipeline p;
  PgrecModel model(p.graph, SimilarityGraph::empty(NodeKind::kUser, 4),
                   SimilarityGraph::empty(NodeKind::kItem, 6), p.fac, p.cfg);
  Scorer scorer(model);
  const std::vector<int> candidates{0, 2, 4, 5, 1};
  const ScoreRow row = scorer.score_items(1, candidates);

  // Direct evaluation: predict every ordered pair weight independently.
  const double range = 4.0;
  const EmbeddingTable items = model.item_reprs();
  const EmbeddingTable users = model.user_reprs(items);
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    double acc = 0;
    for (std::size_t b = 0; b < candidates.size(); ++b) {
      if (a == b) continue;
      const int i = candidates[a], j = candidates[b];
      const std::pair<int, int> pair{std::min(i, j), std::max(i, j)};
      const Matrix pref = model.pref_reprs(items.values, std::span(&pair, 1));
      Matrix urow(1, 4);
      std::copy(users.values.row(1), users.values.row(1) + 4, urow.v.begin());
      double w = model.predict(urow, pref)[0];
      w = std::clamp(w, -range, range);
      acc += (i < j ? w : -w);
    }
    const double expected = acc / (range * (candidates.size() - 1));
    CHECK(row.scores[a] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("scores stay in the unit interval under saturation") {
  Pipeline p;
  PgrecModel model(p.graph, SimilarityGraph::empty(NodeKind::kUser, 4),
                   SimilarityGraph::empty(NodeKind::kItem, 6), p.fac, p.cfg);
  // Force the head to a huge constant output: predictions saturate at the
  // clamp, so every score lands exactly on the bound.
  std::fill(model.params().head_w3.value.v.begin(), model.params().head_w3.value.v.end(), 0.0);
  model.params().head_b3.value.v[0] = 1e9;
  Scorer scorer(model);
  const ScoreRow row = scorer.score_items(0, {0, 1, 2, 3});
  for (std::size_t a = 0; a < row.scores.size(); ++a) CHECK(std::fabs(row.scores[a]) <= 1.0 + 1e-9);
  // Candidate 0 is canonical-first against every other: f = +1 exactly.
  CHECK(row.scores[0] == doctest::Approx(1.0));
  CHECK(row.scores[3] == doctest::Approx(-1.0));

  // All-zero predictions give neutral scores.
  model.params().head_b3.value.v[0] = 0.0;
  std::fill(model.params().head_w1.value.v.begin(), model.params().head_w1.value.v.end(), 0.0);
  std::fill(model.params().head_s1.value.v.begin(), model.params().head_s1.value.v.end(), 0.0);
  Scorer neutral(model);
  const ScoreRow zero = neutral.score_items(0, {0, 1, 2, 3});
  for (double s : zero.scores) CHECK(s == 0.0);
}

TEST_CASE("score_items is invariant under candidate relabeling") {
  Pipeline p;
  PgrecModel model(p.graph, SimilarityGraph::empty(NodeKind::kUser, 4),
                   SimilarityGraph::empty(NodeKind::kItem, 6), p.fac, p.cfg);
  Scorer scorer(model);
  const std::vector<int> original{0, 2, 4, 5};
  const std::vector<int> permuted{4, 0, 5, 2};
  const ScoreRow a = scorer.score_items(2, original);
  const ScoreRow b = scorer.score_items(2, permuted);
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto at = std::find(permuted.begin(), permuted.end(), original[i]);
    const double other = b.scores[at - permuted.begin()];
    CHECK(a.scores[i] == doctest::Approx(other).epsilon(1e-12));
  }
  CHECK_THROWS_AS(scorer.score_items(0, {3}), Error);  // needs two candidates
}

TEST_CASE("evaluate averages per-user ndcg in user order") {
  Pipeline p;
  // Split with test ratings for users 0..2.
  Split split;
  split.upl = 2;
  split.n_eval = 2;
  split.seed = 1;
  split.train = p.train;
  split.test = store_from(4, 6, {{0, 4, 5}, {0, 5, 2}, {1, 1, 4}, {1, 3, 3}, {2, 0, 2}, {2, 2, 5}});
  PgrecModel model(p.graph, SimilarityGraph::empty(NodeKind::kUser, 4),
                   SimilarityGraph::empty(NodeKind::kItem, 6), p.fac, p.cfg);
  Scorer scorer(model);
  const RunResult serial = evaluate(split, scorer);
  CHECK(serial.users == std::vector<int>{0, 1, 2});
  double mean5 = 0;
  for (double v : serial.per_user_ndcg5) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
    mean5 += v;
  }
  CHECK(serial.ndcg5_mean == doctest::Approx(mean5 / 3.0));
  // Worker-pool evaluation gives identical results.
  const RunResult parallel = evaluate(split, scorer, Eq7Denominator::kCandidates, 3);
  CHECK(parallel.per_user_ndcg10 == serial.per_user_ndcg10);
  CHECK(parallel.ndcg10_mean == serial.ndcg10_mean);
  // Extra list lengths ride along without disturbing the standard two.
  const RunResult with_extra = evaluate(split, scorer, Eq7Denominator::kCandidates, 1, {1, 5});
  CHECK(with_extra.ndcg5_mean == serial.ndcg5_mean);
  REQUIRE(with_extra.ndcg_mean_extra.count(1) == 1);
  CHECK(with_extra.ndcg_mean_extra.at(1) >= 0.0);
  CHECK(with_extra.ndcg_mean_extra.at(1) <= 1.0);
}

TEST_CASE("perfect and single-user evaluation cases") {
  // A fake score table is emulated by a model whose predictions are ignored:
  // single-user split means the mean equals that user's value.
  Pipeline p;
  Split split;
  split.upl = 2;
  split.n_eval = 1;
  split.train = p.train;
  split.test = store_from(4, 6, {{2, 0, 4}, {2, 4, 2}});
  PgrecModel model(p.graph, SimilarityGraph::empty(NodeKind::kUser, 4),
                   SimilarityGraph::empty(NodeKind::kItem, 6), p.fac, p.cfg);
  Scorer scorer(model);
  const RunResult r = evaluate(split, scorer);
  CHECK(r.users.size() == 1);
  CHECK(r.ndcg10_mean == doctest::Approx(r.per_user_ndcg10[0]));
}

TEST_CASE("aggregate_runs means and deviations") {
  RunResult a, b;
  a.variant = b.variant = "simple";
  a.upl = b.upl = 10;
  a.ndcg5_mean = 0.70;
  a.ndcg10_mean = 0.70;
  b.ndcg5_mean = 0.72;
  b.ndcg10_mean = 0.72;
  const auto rows = aggregate_runs({a, b});
  REQUIRE(rows.size() == 2);
  for (const SummaryRow& row : rows) {
    CHECK(row.mean == doctest::Approx(0.71));
    CHECK(row.stddev == doctest::Approx(std::sqrt(0.0002 / 1)).epsilon(1e-9));
    CHECK(row.runs == 2);
  }
  // identical runs: zero deviation
  const auto same = aggregate_runs({a, a});
  CHECK(same[0].stddev == 0.0);
  // five seeded runs: summary matches recomputation
  std::vector<RunResult> five;
  Rng rng(5);
  double sum = 0;
  for (int i = 0; i < 5; ++i) {
    RunResult r = a;
    r.ndcg10_mean = 0.6 + 0.05 * rng.uniform();
    sum += r.ndcg10_mean;
    five.push_back(r);
  }
  const auto agg = aggregate_runs(five);
  for (const SummaryRow& row : agg)
    if (row.topn == 10) CHECK(row.mean == doctest::Approx(sum / 5.0));
  CHECK_THROWS_AS(aggregate_runs({}), Error);
}
