#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgrec/model.hpp"
#include "pgrec/split.hpp"

namespace pgrec {

// How the preference-sum normalizer is read: the candidate set being ranked
// (|C| - 1 terms, keeps scores in [-1, 1]) or the literal count of items the
// user rated in training.
enum class Eq7Denominator { kCandidates, kRatedItems };

struct ScoreRow {
  int user = 0;
  std::vector<int> items;      // candidate items
  std::vector<double> scores;  // f(u, i) per candidate
};

struct RunResult {
  std::string variant;
  int upl = 0;
  std::uint64_t seed = 0;
  double ndcg5_mean = 0.0;
  double ndcg10_mean = 0.0;
  std::map<int, double> ndcg_mean_extra;  // requested list lengths beyond 5/10
  std::vector<int> users;               // evaluated users, ascending
  std::vector<double> per_user_ndcg5;   // aligned with `users`
  std::vector<double> per_user_ndcg10;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

// Eval-time scoring context: embedding tables computed once per trained
// model, then candidate preference nodes are materialized lazily per user.
class Scorer {
 public:
  explicit Scorer(PgrecModel& model);

  // Score every candidate for one user: each unordered candidate pair gets a
  // predicted weight, clamped to the legal range, oriented toward the target
  // item and averaged. |candidates| must be at least 2.
  ScoreRow score_items(int user, const std::vector<int>& candidates,
                       Eq7Denominator mode = Eq7Denominator::kCandidates) const;

  const EmbeddingTable& item_table() const { return items_; }
  const EmbeddingTable& user_table() const { return users_; }

 private:
  PgrecModel* model_;
  EmbeddingTable items_;
  EmbeddingTable users_;
  double weight_range_;  // kmax - kmin
};

// Items ordered by score descending, ties by ascending item index, truncated
// to n (shorter when fewer candidates exist).
std::vector<int> recommend_top_n(const ScoreRow& row, int n);

// test_ratings: (item, rating) pairs, one per item. Gains for recommended
// items without a test rating are 0. Logarithm base 2; the DCG/IDCG ratio is
// base-invariant.
double ndcg_at_n(const std::vector<int>& recommended,
                 const std::vector<std::pair<int, double>>& test_ratings, int n);

// Per evaluated user: candidates are the user's test items; mean NDCG over
// users for every requested list length (5 and 10 always included).
// `threads` > 1 scores users on a worker pool; results are aggregated in
// ascending user order either way.
RunResult evaluate(const Split& split, Scorer& scorer,
                   Eq7Denominator mode = Eq7Denominator::kCandidates, int threads = 1,
                   const std::vector<int>& n_list = {5, 10});

struct SummaryRow {
  std::string variant;
  int upl = 0;
  int topn = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single run
  int runs = 0;
};

std::vector<SummaryRow> aggregate_runs(const std::vector<RunResult>& results);

}  // namespace pgrec
