#pragma once

#include <string>
#include <vector>

#include "pgrec/config.hpp"
#include "pgrec/ranking.hpp"

namespace pgrec {

struct ExperimentOutput {
  std::vector<RunResult> results;       // sorted by (variant, upl, run)
  std::vector<SummaryRow> summary;
  std::string results_path;
  std::string summary_path;
};

// One pipeline execution for a single (upl, seed): split, graphs per
// variant, clustering, factorization, training, evaluation.
RunResult run_single(const ExperimentConfig& config, const Dataset& data, int upl,
                     std::uint64_t seed, const std::string& checkpoint_path = "");

// Every (upl, run) in the config; writes results.csv and summary.csv under
// the output directory. Runs execute sequentially unless parallel_runs > 1;
// the results file is sorted, so its body does not depend on scheduling.
ExperimentOutput run_experiment(const ExperimentConfig& config);

// CSV body helper: results rows without the timing columns (used by the
// determinism check).
std::string results_csv(const std::vector<RunResult>& results, bool with_timing);

}  // namespace pgrec
