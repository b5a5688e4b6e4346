#include "pgrec/ranking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "pgrec/kernels.hpp"

namespace pgrec {

Scorer::Scorer(PgrecModel& model) : model_(&model) {
  items_ = model.item_reprs();
  users_ = model.user_reprs(items_);
  weight_range_ = static_cast<double>(model.graph().kmax - model.graph().kmin);
}

ScoreRow Scorer::score_items(int user, const std::vector<int>& candidates,
                             Eq7Denominator mode) const {
  require(candidates.size() >= 2, "score_items: need at least two candidates");
  require(user >= 0 && user < users_.values.rows, "score_items: user out of range");
  const int c = static_cast<int>(candidates.size());

  // Candidate preference nodes are materialized lazily, canonical item order.
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(c) * (c - 1) / 2);
  for (int a = 0; a < c; ++a)
    for (int b = a + 1; b < c; ++b)
      pairs.emplace_back(std::min(candidates[a], candidates[b]),
                         std::max(candidates[a], candidates[b]));

  std::vector<double> predicted;
  predicted.reserve(pairs.size());
  const std::size_t chunk = 8192;
  for (std::size_t start = 0; start < pairs.size(); start += chunk) {
    const std::size_t stop = std::min(pairs.size(), start + chunk);
    const std::span<const std::pair<int, int>> slice(pairs.data() + start, stop - start);
    const Matrix prefs = model_->pref_reprs(items_.values, slice);
    Matrix user_rows(prefs.rows, users_.values.cols);
    for (int r = 0; r < prefs.rows; ++r)
      std::copy(users_.values.row(user), users_.values.row(user) + users_.values.cols,
                user_rows.row(r));
    std::vector<double> chunk_pred = model_->predict(user_rows, prefs);
    // Predictions are clamped to the legal weight range before aggregation.
    kernels::clamp(chunk_pred.data(), -weight_range_, weight_range_, chunk_pred.data(),
                   chunk_pred.size());
    predicted.insert(predicted.end(), chunk_pred.begin(), chunk_pred.end());
  }

  ScoreRow row;
  row.user = user;
  row.items = candidates;
  row.scores.assign(c, 0.0);
  // f(u, i) sums w_up * w_pi: +w toward the canonical first item, -w toward
  // the second; orient each pair toward the candidate positions it came from.
  std::size_t k = 0;
  for (int a = 0; a < c; ++a)
    for (int b = a + 1; b < c; ++b, ++k) {
      const double w = candidates[a] < candidates[b] ? predicted[k] : -predicted[k];
      row.scores[a] += w;
      row.scores[b] -= w;
    }

  double denom = weight_range_ * (c - 1);
  if (mode == Eq7Denominator::kRatedItems) {
    const PrefGraph& g = model_->graph();
    const int rated = g.ui_ptr[user + 1] - g.ui_ptr[user];
    denom = weight_range_ * std::max(1, rated - 1);
  }
  for (double& s : row.scores) s /= denom;
  return row;
}

std::vector<int> recommend_top_n(const ScoreRow& row, int n) {
  require(n >= 1, "recommend_top_n: n must be at least 1");
  std::vector<int> order(row.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (row.scores[a] != row.scores[b]) return row.scores[a] > row.scores[b];
    return row.items[a] < row.items[b];
  });
  std::vector<int> out;
  out.reserve(std::min<std::size_t>(order.size(), n));
  for (int i = 0; i < static_cast<int>(order.size()) && i < n; ++i)
    out.push_back(row.items[order[i]]);
  return out;
}

double ndcg_at_n(const std::vector<int>& recommended,
                 const std::vector<std::pair<int, double>>& test_ratings, int n) {
  require(n >= 1, "ndcg_at_n: n must be at least 1");
  std::map<int, double> gain;
  for (const auto& [item, rating] : test_ratings) gain[item] = rating;

  double dcg = 0.0;
  for (int pos = 1; pos <= n && pos <= static_cast<int>(recommended.size()); ++pos) {
    const auto it = gain.find(recommended[pos - 1]);
    const double g = it == gain.end() ? 0.0 : it->second;
    dcg += (std::exp2(g) - 1.0) / std::log2(pos + 1.0);
  }

  std::vector<double> ideal;
  ideal.reserve(test_ratings.size());
  for (const auto& [_, rating] : test_ratings) ideal.push_back(rating);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (int pos = 1; pos <= n && pos <= static_cast<int>(ideal.size()); ++pos)
    idcg += (std::exp2(ideal[pos - 1]) - 1.0) / std::log2(pos + 1.0);

  return idcg > 0.0 ? dcg / idcg : 0.0;
}

RunResult evaluate(const Split& split, Scorer& scorer, Eq7Denominator mode, int threads,
                   const std::vector<int>& n_list) {
  RunResult out;
  out.upl = split.upl;
  out.seed = split.seed;
  out.users = split.test_users();
  const std::size_t n = out.users.size();
  require(n > 0, "evaluate: no test users");
  out.per_user_ndcg5.assign(n, 0.0);
  out.per_user_ndcg10.assign(n, 0.0);

  std::vector<int> lengths = n_list;
  lengths.push_back(5);
  lengths.push_back(10);
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  require(lengths.front() >= 1, "evaluate: list lengths must be positive");
  std::vector<std::vector<double>> extra(lengths.size(), std::vector<double>(n, 0.0));

  auto score_user = [&](std::size_t idx) {
    const int user = out.users[idx];
    std::vector<int> candidates;
    std::vector<std::pair<int, double>> test_ratings;
    for (const Rating& r : split.test.of_user(user)) {
      candidates.push_back(r.item);
      test_ratings.emplace_back(r.item, r.value);
    }
    const ScoreRow row = scorer.score_items(user, candidates, mode);
    const std::vector<int> top = recommend_top_n(row, lengths.back());
    for (std::size_t k = 0; k < lengths.size(); ++k)
      extra[k][idx] = ndcg_at_n(top, test_ratings, lengths[k]);
    out.per_user_ndcg5[idx] = ndcg_at_n(top, test_ratings, 5);
    out.per_user_ndcg10[idx] = ndcg_at_n(top, test_ratings, 10);
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) score_user(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) score_user(i);
      });
    for (auto& t : pool) t.join();
  }

  // Deterministic aggregation in ascending user order.
  double sum5 = 0.0, sum10 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum5 += out.per_user_ndcg5[i];
    sum10 += out.per_user_ndcg10[i];
  }
  out.ndcg5_mean = sum5 / static_cast<double>(n);
  out.ndcg10_mean = sum10 / static_cast<double>(n);
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    if (lengths[k] == 5 || lengths[k] == 10) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += extra[k][i];
    out.ndcg_mean_extra[lengths[k]] = sum / static_cast<double>(n);
  }
  return out;
}

std::vector<SummaryRow> aggregate_runs(const std::vector<RunResult>& results) {
  require(!results.empty(), "aggregate_runs: no results");
  std::map<std::pair<std::string, int>, std::vector<const RunResult*>> groups;
  for (const RunResult& r : results) groups[{r.variant, r.upl}].push_back(&r);

  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    for (const int topn : {5, 10}) {
      SummaryRow row;
      row.variant = key.first;
      row.upl = key.second;
      row.topn = topn;
      row.runs = static_cast<int>(members.size());
      double sum = 0.0;
      for (const RunResult* r : members) sum += topn == 5 ? r->ndcg5_mean : r->ndcg10_mean;
      row.mean = sum / members.size();
      double ss = 0.0;
      for (const RunResult* r : members) {
        const double d = (topn == 5 ? r->ndcg5_mean : r->ndcg10_mean) - row.mean;
        ss += d * d;
      }
      row.stddev = members.size() > 1 ? std::sqrt(ss / (members.size() - 1)) : 0.0;
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace pgrec
