#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgrec/adam.hpp"
#include "pgrec/nmf.hpp"
#include "pgrec/prefgraph.hpp"
#include "pgrec/propagation.hpp"
#include "pgrec/similarity.hpp"
#include "pgrec/tape.hpp"

namespace pgrec {

// Width plan: NMF rank f feeds every branch; each of the four branches
// outputs d/2 so concatenation gives users, items and preferences one shared
// width d. The halving layer maps 2d -> d; the head reads 2d.
struct ModelDims {
  int f = 64;
  int d = 64;
  int head1 = 64;
  int head2 = 32;
};

struct TrainConfig {
  ModelDims dims;
  double lr = 1e-4;
  double l2 = 0.0055;
  double dropout_mid = 0.4;
  double dropout_last = 0.8;
  int batch_edges = 1024;
  int epochs = 30;
  int patience = 5;
  int folds = 5;
  bool pretrain = true;
  // Self-loop weights; a non-positive value means 1 + max |w| per graph.
  double beta_item_sim = 0.0;
  double beta_user_sim = 0.0;
  double beta_user_item = 0.0;
  double beta_user_pref = 0.0;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  bool verbose = false;
};

// Every trainable tensor plus the batch-norm running statistics and the
// head's dropout rates.
struct ModelParams {
  ModelDims dims;
  Parameter theta_item_sim, theta_item_user, theta_user_sim, theta_user_pref;
  Parameter halve_w, halve_b;
  Parameter head_w1, head_b1, head_g1, head_s1;
  Parameter head_w2, head_b2, head_g2, head_s2;
  Parameter head_w3, head_b3;
  BatchNormState bn1, bn2;
  double dropout_mid = 0.4;
  double dropout_last = 0.8;

  void init(const ModelDims& d, std::uint64_t seed, double bn_momentum, double bn_eps);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  // Tensors under the L2 penalty (weight matrices; biases and batch-norm
  // scale/shift are exempt).
  std::vector<Parameter*> l2_weights();
};

struct EmbeddingTable {
  NodeKind kind = NodeKind::kUser;
  Matrix values;  // node index -> row
};

struct EpochLog {
  double train_rmse = 0.0;   // data term: sqrt(sum of squared errors / edges)
  double train_loss = 0.0;   // optimized objective: batch RMSE + L2 penalty, edge-weighted
  double val_rmse = -1.0;    // -1 when no validation set
};

struct TrainResult {
  std::vector<EpochLog> history;  // final (full-data) phase
  std::vector<std::vector<EpochLog>> fold_history;
  int best_fold = -1;
  double best_val_rmse = -1.0;
};

// End-to-end model: four propagation branches, the preference halving layer
// and the prediction head, trained jointly against the known user-preference
// edge weights.
class PgrecModel {
 public:
  PgrecModel(const PrefGraph& graph, const SimilarityGraph& user_sim,
             const SimilarityGraph& item_sim, const Factorization& nmf, TrainConfig config);

  // Phase 1 (optional k-fold pretraining with early stopping, best fold
  // selected by validation RMSE) then phase 2 on all edges.
  TrainResult train();

  // Eval-mode tables (dropout off, running batch statistics).
  EmbeddingTable item_reprs();
  // Streams preference embeddings per user chunk; never materializes the
  // full preference table.
  EmbeddingTable user_reprs(const EmbeddingTable& items);
  // Spec-shaped variant taking a full preference table (small graphs only).
  EmbeddingTable user_reprs_from_pref_table(const EmbeddingTable& prefs);
  // Preference embeddings for explicit canonical pairs from an item table.
  Matrix pref_reprs(const Matrix& item_values, std::span<const std::pair<int, int>> pairs);
  // Eval-mode head over joined user/preference rows.
  std::vector<double> predict(const Matrix& user_rows, const Matrix& pref_rows);

  // Loss over an explicit edge list; exposed for the finite-difference
  // gradient checks. train_mode toggles dropout and batch statistics.
  double loss_on_edges(const std::vector<int>& users, const std::vector<int>& prefs,
                       const std::vector<double>& targets, bool train_mode,
                       bool backward, Rng* dropout_rng = nullptr);

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return config_; }
  const PrefGraph& graph() const { return *graph_; }
  double beta_user_pref() const { return beta_up_; }

 private:
  struct EdgeSet {
    std::vector<int> user_ptr;  // n_users + 1
    std::vector<int> pref;
    std::vector<double> w;
    std::vector<double> user_deg;  // beta + sum |w| within this set
    std::vector<double> pref_deg;
    std::size_t count() const { return pref.size(); }
  };

  struct Batch;

  EdgeSet make_edge_set(const std::vector<char>& keep) const;
  Batch make_batch(const std::vector<int>& users, const EdgeSet& prop,
                   const EdgeSet* targets) const;
  GradientTape::ValueId build_item_block(GradientTape& t, const std::vector<int>& items);
  GradientTape::ValueId build_head(GradientTape& t, GradientTape::ValueId joined, bool train,
                                   Rng* rng);
  // Forward over one batch; returns predictions (E x 1).
  GradientTape::ValueId build_forward(GradientTape& t, const Batch& b, bool train, Rng* rng);

  struct PhaseOutcome {
    std::vector<EpochLog> history;
    double best_val = -1.0;
  };
  PhaseOutcome run_phase(const EdgeSet& prop, const EdgeSet& targets, const EdgeSet* val,
                         int epochs, int patience, Rng& rng, const std::string& tag);
  double validation_rmse(const EdgeSet& prop, const EdgeSet& val);

  const PrefGraph* graph_;
  TrainConfig config_;
  ModelParams params_;

  // Propagation constants (fixed per run).
  Matrix x_users_;      // n x f
  Matrix x_items_;      // m x f
  Matrix m_item_sim_;   // item-sim operator applied to x_items_
  Matrix m_item_user_;  // item rows of the user-item operator applied to the stack
  Matrix m_user_sim_;   // user-sim operator applied to x_users_
  double beta_up_ = 1.0;
  EdgeSet full_;
};

// Spec-shaped assembly and prediction entry points.
EmbeddingTable assemble_item_reprs(PgrecModel& model);
EmbeddingTable assemble_pref_reprs(PgrecModel& model, const EmbeddingTable& items);
EmbeddingTable assemble_user_reprs(PgrecModel& model, const EmbeddingTable& prefs);
double predict_weight(std::span<const double> user_vec, std::span<const double> pref_vec,
                      ModelParams& params, bool train_mode, Rng* dropout_rng = nullptr);

}  // namespace pgrec
