#include "pgrec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "pgrec/checkpoint.hpp"
#include "pgrec/spectral.hpp"

namespace pgrec {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SimilarityGraph sparsified(const SimilarityGraph& graph, int c) {
  if (graph.edges.empty()) return graph;
  const int target = std::min(c, graph.node_count);
  return sparsify(graph, recursive_spectral_clustering(graph, target));
}

std::string format_ndcg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

RunResult run_single(const ExperimentConfig& config, const Dataset& data, int upl,
                     std::uint64_t seed, const std::string& checkpoint_path) {
  const auto t0 = std::chrono::steady_clock::now();

  // Stage 1: subsample (optional) and split.
  const RatingStore* base = &data.store;
  RatingStore sampled;
  std::vector<UserProfile> user_profiles = data.users;
  if (config.subsample_users > 0 && config.subsample_users < data.store.n_users) {
    std::vector<int> kept;
    sampled = subsample_users(data.store, config.subsample_users, seed, &kept);
    base = &sampled;
    std::vector<int> new_index(data.store.n_users, -1);
    for (std::size_t i = 0; i < kept.size(); ++i) new_index[kept[i]] = static_cast<int>(i);
    std::vector<UserProfile> remapped;
    for (const UserProfile& p : data.users) {
      if (p.user < 0 || p.user >= data.store.n_users || new_index[p.user] < 0) continue;
      UserProfile q = p;
      q.user = new_index[p.user];
      remapped.push_back(std::move(q));
    }
    user_profiles = std::move(remapped);
  }
  const Split split = weak_generalization_split(*base, upl, config.n_eval, seed);

  // Stage 2: graphs for the selected variant.
  const bool with_content = config.variant == Variant::kContent;
  const PrefGraph graph =
      build_pref_graph(split.train, user_profiles, data.items, with_content, config.include_ties);
  SimilarityGraph user_sim = SimilarityGraph::empty(NodeKind::kUser, graph.n_users);
  SimilarityGraph item_sim = SimilarityGraph::empty(NodeKind::kItem, graph.n_items);
  if (config.variant == Variant::kCorating) {
    user_sim = build_corating_similarity(split.train, NodeKind::kUser);
    item_sim = build_corating_similarity(split.train, NodeKind::kItem);
  } else if (config.variant == Variant::kContent) {
    user_sim = build_content_similarity(user_profiles, graph.n_users);
    item_sim = build_content_similarity(data.items, graph.n_items);
  }
  user_sim = sparsified(user_sim, config.user_clusters);
  item_sim = sparsified(item_sim, config.item_clusters);

  TrainConfig train = config.train;
  train.seed = seed;
  if (config.beta_sim_degree_mult > 0) {
    const auto degree_beta = [&](const SimilarityGraph& g) {
      if (g.edges.empty()) return 0.0;  // keep the default rule
      const auto sums = g.to_csr().abs_row_sums();
      double mx = 0.0;
      for (double v : sums) mx = std::max(mx, v);
      return std::max(1.0, config.beta_sim_degree_mult * mx);
    };
    if (const double b = degree_beta(user_sim); b > 0) train.beta_user_sim = b;
    if (const double b = degree_beta(item_sim); b > 0) train.beta_item_sim = b;
  }

  // Stage 3: initial embeddings.
  NmfOptions nmf_options;
  nmf_options.rank = config.train.dims.f;
  nmf_options.max_iters = config.nmf_iters;
  nmf_options.tol = config.nmf_tol;
  nmf_options.seed = derive_seed(seed, "nmf");
  const Factorization fac = nmf_factorize(split.train, nmf_options);

  // Stage 4: end-to-end training.
  PgrecModel model(graph, user_sim, item_sim, fac, train);
  model.train();
  const double train_seconds = seconds_since(t0);

  if (!checkpoint_path.empty()) {
    Checkpoint ckpt;
    ckpt.config_hash = config.hash();
    ckpt.seed = seed;
    ckpt.params = model.params();
    save_checkpoint(ckpt, checkpoint_path);
  }

  // Stage 5: evaluation.
  const auto t1 = std::chrono::steady_clock::now();
  Scorer scorer(model);
  RunResult result = evaluate(split, scorer, config.eq7, config.eval_threads, config.topn_list);
  result.variant = variant_name(config.variant);
  result.upl = upl;
  result.seed = seed;
  result.train_seconds = train_seconds;
  result.eval_seconds = seconds_since(t1);
  return result;
}

std::string results_csv(const std::vector<RunResult>& results, bool with_timing) {
  std::string out = "variant,upl,run,seed,ndcg5,ndcg10";
  if (with_timing) out += ",train_seconds,eval_seconds";
  out += '\n';
  std::map<std::pair<std::string, int>, int> run_counter;
  for (const RunResult& r : results) {
    const int run = run_counter[{r.variant, r.upl}]++;
    out += r.variant + ',' + std::to_string(r.upl) + ',' + std::to_string(run) + ',' +
           std::to_string(r.seed) + ',' + format_ndcg(r.ndcg5_mean) + ',' +
           format_ndcg(r.ndcg10_mean);
    if (with_timing) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%.3f,%.3f", r.train_seconds, r.eval_seconds);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Dataset data =
      parse_movielens(config.dataset_path, flavor_from_name(config.flavor),
                      DuplicatePolicy::kKeepFirst);

  struct Task {
    int upl;
    int run;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (int upl : config.upl_list)
    for (int run = 0; run < config.runs; ++run)
      tasks.push_back({upl, run, config.seed_for_run(run)});

  std::filesystem::create_directories(config.output_dir);
  if (!config.save_checkpoint_dir.empty())
    std::filesystem::create_directories(config.save_checkpoint_dir);

  std::vector<RunResult> results(tasks.size());
  auto work = [&](std::size_t idx) {
    const Task& task = tasks[idx];
    std::string ckpt_path;
    if (!config.save_checkpoint_dir.empty())
      ckpt_path = config.save_checkpoint_dir + "/" + variant_name(config.variant) + "_upl" +
                  std::to_string(task.upl) + "_run" + std::to_string(task.run) + ".ckpt";
    results[idx] = run_single(config, data, task.upl, task.seed, ckpt_path);
  };

  if (config.parallel_runs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min<int>(config.parallel_runs, static_cast<int>(tasks.size()));
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) work(i);
      });
    for (auto& t : pool) t.join();
  }

  std::sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    if (a.variant != b.variant) return a.variant < b.variant;
    if (a.upl != b.upl) return a.upl < b.upl;
    return a.seed < b.seed;
  });

  ExperimentOutput out;
  out.results = std::move(results);
  out.summary = aggregate_runs(out.results);
  out.results_path = config.output_dir + "/results.csv";
  out.summary_path = config.output_dir + "/summary.csv";

  std::ofstream rf(out.results_path);
  require(rf.good(), "run_experiment: cannot write " + out.results_path);
  rf << results_csv(out.results, true);

  std::ofstream sf(out.summary_path);
  require(sf.good(), "run_experiment: cannot write " + out.summary_path);
  sf << "variant,upl,topn,mean_ndcg,std_ndcg,runs\n";
  for (const SummaryRow& row : out.summary) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,", row.mean, row.stddev);
    sf << row.variant << ',' << row.upl << ',' << row.topn << buf << row.runs << '\n';
  }
  return out;
}

}  // namespace pgrec
