#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "pgrec/checkpoint.hpp"
#include "pgrec/experiment.hpp"
#include "pgrec/spectral.hpp"
#include "pgrec/synthetic.hpp"

namespace {

// CLI flags layered over an optional config file.
struct CliOverrides {
  std::string config_path;
  std::string dataset;
  std::string flavor;
  std::string variant;
  std::vector<int> upl;
  int runs = -1;
  long long seed = -1;
  int subsample = -1;
  std::string out_dir;
  std::vector<int> topn;
  std::string eq7;
  std::string save_ckpt_dir;
  std::string load_ckpt;
  int parallel = -1;
  int epochs = -1;
  int folds = -1;
  int batch = -1;
  int embedding = -1;
  double lr = -1;
  double l2 = -1;
  int clusters = -1;
  double beta_mult = -1;
  bool verbose = false;
  bool no_pretrain = false;
};

pgrec::ExperimentConfig build_config(const CliOverrides& o) {
  pgrec::ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = pgrec::load_config(o.config_path);
  if (!o.dataset.empty()) cfg.dataset_path = o.dataset;
  if (!o.flavor.empty()) cfg.flavor = o.flavor;
  if (!o.variant.empty()) cfg.variant = pgrec::variant_from_name(o.variant);
  if (!o.upl.empty()) cfg.upl_list = o.upl;
  if (o.runs > 0) cfg.runs = o.runs;
  if (o.seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(o.seed);
  if (o.subsample >= 0) cfg.subsample_users = o.subsample;
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  if (!o.topn.empty()) cfg.topn_list = o.topn;
  if (!o.eq7.empty()) {
    if (o.eq7 == "candidates") cfg.eq7 = pgrec::Eq7Denominator::kCandidates;
    else if (o.eq7 == "rated") cfg.eq7 = pgrec::Eq7Denominator::kRatedItems;
    else throw pgrec::Error("--eq7 must be candidates or rated");
  }
  if (!o.save_ckpt_dir.empty()) cfg.save_checkpoint_dir = o.save_ckpt_dir;
  if (!o.load_ckpt.empty()) cfg.load_checkpoint_file = o.load_ckpt;
  if (o.parallel > 0) cfg.parallel_runs = o.parallel;
  if (o.epochs >= 0) cfg.train.epochs = o.epochs;
  if (o.folds >= 0) cfg.train.folds = o.folds;
  if (o.batch > 0) cfg.train.batch_edges = o.batch;
  if (o.embedding > 0) {
    cfg.train.dims.d = o.embedding;
    cfg.train.dims.f = o.embedding;
  }
  if (o.lr > 0) cfg.train.lr = o.lr;
  if (o.l2 >= 0) cfg.train.l2 = o.l2;
  if (o.clusters > 0) cfg.user_clusters = cfg.item_clusters = o.clusters;
  if (o.beta_mult >= 0) cfg.beta_sim_degree_mult = o.beta_mult;
  if (o.no_pretrain) cfg.train.pretrain = false;
  cfg.train.verbose = o.verbose;
  return cfg;
}

void add_common(CLI::App* app, CliOverrides& o) {
  app->add_option("--config", o.config_path, "config file (INI sections)");
  app->add_option("--dataset", o.dataset, "dataset directory");
  app->add_option("--flavor", o.flavor, "ml100k or ml1m");
  app->add_option("--variant", o.variant, "simple / corating / content");
  app->add_option("--upl", o.upl, "train ratings per user (repeatable)");
  app->add_option("--runs", o.runs, "independent runs per upl");
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--subsample-users", o.subsample, "evaluate on a user subset (0 = all)");
  app->add_option("--out", o.out_dir, "output directory");
  app->add_option("--topn", o.topn, "recommendation list lengths");
  app->add_option("--eq7", o.eq7, "preference-sum denominator: candidates | rated");
  app->add_option("--save-checkpoints", o.save_ckpt_dir, "write one checkpoint per run");
  app->add_option("--load-checkpoint", o.load_ckpt, "inspect a checkpoint and exit");
  app->add_option("--parallel", o.parallel, "concurrent runs");
  app->add_option("--epochs", o.epochs, "training epochs per phase");
  app->add_option("--folds", o.folds, "pretraining folds");
  app->add_option("--batch", o.batch, "edges per training batch");
  app->add_option("--embedding", o.embedding, "embedding width");
  app->add_option("--lr", o.lr, "Adam learning rate");
  app->add_option("--l2", o.l2, "L2 penalty");
  app->add_option("--clusters", o.clusters, "cluster count for both similarity graphs");
  app->add_option("--beta-sim-mult", o.beta_mult,
                  "similarity self-loop as a multiple of the graph's max degree");
  app->add_flag("--no-pretrain", o.no_pretrain, "skip k-fold pretraining");
  app->add_flag("--verbose", o.verbose, "epoch-level logging");
}

int cmd_run(const CliOverrides& o) {
  pgrec::ExperimentConfig cfg = build_config(o);
  if (!cfg.load_checkpoint_file.empty()) {
    const pgrec::Checkpoint ckpt = pgrec::load_checkpoint(cfg.load_checkpoint_file, cfg.hash());
    std::cout << "checkpoint ok: seed " << ckpt.seed << ", config hash " << ckpt.config_hash
              << ", adam " << (ckpt.adam ? "present" : "absent") << '\n';
    return 0;
  }
  const pgrec::ExperimentOutput out = pgrec::run_experiment(cfg);
  std::cout << "wrote " << out.results_path << " and " << out.summary_path << '\n';
  for (const pgrec::SummaryRow& row : out.summary)
    std::cout << row.variant << " upl=" << row.upl << " ndcg@" << row.topn << " = " << row.mean
              << " (std " << row.stddev << ", runs " << row.runs << ")\n";
  for (const pgrec::RunResult& r : out.results)
    for (const auto& [topn, mean] : r.ndcg_mean_extra)
      std::cout << r.variant << " upl=" << r.upl << " seed=" << r.seed << " ndcg@" << topn
                << " = " << mean << '\n';
  return 0;
}

int cmd_dump_graph(const CliOverrides& o, const std::string& out_path, int upl, long long seed) {
  pgrec::ExperimentConfig cfg = build_config(o);
  pgrec::require(!cfg.dataset_path.empty(), "--dataset required");
  const pgrec::Dataset data = pgrec::parse_movielens(
      cfg.dataset_path, pgrec::flavor_from_name(cfg.flavor), pgrec::DuplicatePolicy::kKeepFirst);
  const pgrec::Split split = pgrec::weak_generalization_split(
      data.store, upl, cfg.n_eval, static_cast<std::uint64_t>(seed));
  const pgrec::PrefGraph graph = pgrec::build_pref_graph(
      split.train, data.users, data.items, cfg.variant == pgrec::Variant::kContent,
      cfg.include_ties);
  std::ofstream out(out_path);
  pgrec::require(out.good(), "cannot write " + out_path);
  pgrec::dump_edge_list(graph, out);
  std::cout << "wrote " << out_path << " (" << graph.pref_count() << " preference nodes)\n";
  return 0;
}

int cmd_make_dataset(const std::string& dir, const std::string& kind, long long seed) {
  pgrec::SyntheticSpec spec =
      kind == "mini" ? pgrec::mini_spec() : pgrec::standin_spec();
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  pgrec::write_synthetic_dataset(dir, spec);
  std::cout << "wrote " << dir << " (" << spec.users << " users, " << spec.items << " items, "
            << spec.rows << " rating rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PGRec: preference-graph recommendation pipeline"};
  app.require_subcommand(1);
  CliOverrides o;

  CLI::App* run = app.add_subcommand("run", "run the experiment pipeline");
  add_common(run, o);

  CLI::App* dump = app.add_subcommand("dump-graph", "write the preference graph edge list");
  add_common(dump, o);
  std::string dump_out = "prefgraph.txt";
  int dump_upl = 10;
  long long dump_seed = 7;
  dump->add_option("--graph-out", dump_out, "edge list path");
  dump->add_option("--graph-upl", dump_upl, "upl for the dumped split");
  dump->add_option("--graph-seed", dump_seed, "split seed");

  CLI::App* make = app.add_subcommand("make-dataset", "write a synthetic dataset");
  std::string make_dir = "data/synthetic";
  std::string make_kind = "standin";
  long long make_seed = -1;
  make->add_option("--dir", make_dir, "target directory");
  make->add_option("--kind", make_kind, "mini or standin")
      ->check(CLI::IsMember({"mini", "standin"}));
  make->add_option("--gen-seed", make_seed, "generator seed override");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(o);
    if (dump->parsed()) return cmd_dump_graph(o, dump_out, dump_upl, dump_seed);
    if (make->parsed()) return cmd_make_dataset(make_dir, make_kind, make_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
