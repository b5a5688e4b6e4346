#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgrec/model.hpp"
#include "pgrec/ranking.hpp"

namespace pgrec {

enum class Variant { kSimple, kCorating, kContent };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Full experiment description. All training hyperparameters default to the
// standard values, so a minimal config names only dataset, variant and upl.
struct ExperimentConfig {
  std::string dataset_path;
  std::string flavor = "ml100k";
  Variant variant = Variant::kSimple;
  std::vector<int> upl_list = {10};
  int n_eval = 10;
  int runs = 1;
  std::uint64_t base_seed = 7;
  std::vector<std::uint64_t> seeds;  // filled from base_seed when empty
  int subsample_users = 0;           // 0 = all users
  int user_clusters = 8;
  int item_clusters = 8;
  // When positive, the similarity-graph self-loops are set to this multiple
  // of each sparsified graph's largest absolute degree instead of the
  // default 1 + max |w| rule. Keeps the self signal from being swamped on
  // dense count-weighted graphs.
  double beta_sim_degree_mult = 0.0;
  bool include_ties = true;
  TrainConfig train;  // dims + optimizer + schedule defaults
  int nmf_iters = 200;
  double nmf_tol = 1e-4;
  std::vector<int> topn_list = {5, 10};
  Eq7Denominator eq7 = Eq7Denominator::kCandidates;
  int eval_threads = 1;
  int parallel_runs = 1;
  std::string output_dir = "out";
  std::string save_checkpoint_dir;  // empty = off
  std::string load_checkpoint_file; // empty = off

  void validate() const;
  // Seeds per run: seeds[i] when provided, else base_seed + i.
  std::uint64_t seed_for_run(int run) const;
  // Stable hash over every field that affects results (timing excluded).
  std::uint64_t hash() const;
  std::string canonical_text() const;
};

// INI-style sections ([dataset], [experiment], [model], [clustering],
// [training], [eval], [output]); '#' and ';' start comments.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace pgrec
