#include "pgrec/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pgrec/rng.hpp"

namespace pgrec {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kSimple: return "simple";
    case Variant::kCorating: return "corating";
    case Variant::kContent: return "content";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "simple" || name == "s") return Variant::kSimple;
  if (name == "corating" || name == "co") return Variant::kCorating;
  if (name == "content" || name == "c") return Variant::kContent;
  throw Error("unknown variant \"" + name + "\" (expected simple, corating or content)");
}

void ExperimentConfig::validate() const {
  require(!dataset_path.empty(), "config: dataset path missing");
  require(!upl_list.empty(), "config: upl list empty");
  for (int upl : upl_list) require(upl >= 2, "config: upl must be at least 2");
  require(n_eval >= 1, "config: n_eval must be positive");
  require(runs >= 1, "config: runs must be positive");
  require(seeds.empty() || static_cast<int>(seeds.size()) == runs,
          "config: seeds length must equal runs");
  require(subsample_users >= 0, "config: subsample_users must be non-negative");
  require(user_clusters >= 1 && item_clusters >= 1, "config: cluster counts must be positive");
  require(beta_sim_degree_mult >= 0, "config: beta_sim_degree_mult must be non-negative");
  require(train.lr > 0, "config: learning rate must be positive");
  require(train.l2 >= 0, "config: l2 must be non-negative");
  require(train.dropout_mid >= 0 && train.dropout_mid < 1, "config: dropout_mid out of range");
  require(train.dropout_last >= 0 && train.dropout_last < 1, "config: dropout_last out of range");
  require(train.batch_edges >= 1, "config: batch must be positive");
  require(train.epochs >= 0, "config: epochs must be non-negative");
  require(train.folds >= 0, "config: folds must be non-negative");
  require(train.dims.f >= 1 && train.dims.d >= 2 && train.dims.d % 2 == 0,
          "config: embedding width must be even and positive");
  require(train.dims.f == train.dims.d, "config: nmf rank must equal the embedding width");
  require(nmf_iters >= 1, "config: nmf_iters must be positive");
  require(!topn_list.empty(), "config: topn list empty");
  for (int n : topn_list) require(n >= 1, "config: topn entries must be positive");
  require(eval_threads >= 1, "config: eval_threads must be positive");
  require(parallel_runs >= 1, "config: parallel_runs must be positive");
  require(!output_dir.empty(), "config: output dir missing");
}

std::uint64_t ExperimentConfig::seed_for_run(int run) const {
  if (!seeds.empty()) return seeds[run];
  return base_seed + static_cast<std::uint64_t>(run);
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "flavor=" << flavor << ";variant=" << variant_name(variant) << ";upl=";
  for (int u : upl_list) out << u << ',';
  out << ";n_eval=" << n_eval << ";runs=" << runs << ";base_seed=" << base_seed << ";seeds=";
  for (auto s : seeds) out << s << ',';
  out << ";subsample=" << subsample_users << ";uc=" << user_clusters << ";ic=" << item_clusters
      << ";bsdm=" << beta_sim_degree_mult << ";ties=" << include_ties << ";f=" << train.dims.f << ";d=" << train.dims.d
      << ";head1=" << train.dims.head1 << ";head2=" << train.dims.head2 << ";lr=" << train.lr
      << ";l2=" << train.l2 << ";dmid=" << train.dropout_mid << ";dlast=" << train.dropout_last
      << ";batch=" << train.batch_edges << ";epochs=" << train.epochs
      << ";patience=" << train.patience << ";folds=" << train.folds
      << ";pretrain=" << train.pretrain << ";bis=" << train.beta_item_sim
      << ";bus=" << train.beta_user_sim << ";bui=" << train.beta_user_item
      << ";bup=" << train.beta_user_pref << ";bnm=" << train.bn_momentum
      << ";bne=" << train.bn_eps << ";ab1=" << train.adam_beta1 << ";ab2=" << train.adam_beta2
      << ";ae=" << train.adam_eps << ";nmf_iters=" << nmf_iters << ";nmf_tol=" << nmf_tol
      << ";eq7=" << (eq7 == Eq7Denominator::kCandidates ? "candidates" : "rated");
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string text = canonical_text();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

long long to_int(const std::string& v, const std::string& key) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), "config: bad integer for " + key);
  return out;
}

double to_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    require(used == v.size(), "config: bad number for " + key);
    return out;
  } catch (const std::exception&) {
    throw Error("config: bad number for " + key);
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: bad boolean for " + key);
}

std::vector<int> to_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(static_cast<int>(to_int(tok, key)));
  }
  require(!out.empty(), "config: empty list for " + key);
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', origin + " line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos,
            origin + " line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qual = section.empty() ? key : section + "." + key;

    if (qual == "dataset.path") cfg.dataset_path = value;
    else if (qual == "dataset.flavor") cfg.flavor = value;
    else if (qual == "experiment.variant") cfg.variant = variant_from_name(value);
    else if (qual == "experiment.upl") cfg.upl_list = to_int_list(value, qual);
    else if (qual == "experiment.n_eval") cfg.n_eval = static_cast<int>(to_int(value, qual));
    else if (qual == "experiment.runs") cfg.runs = static_cast<int>(to_int(value, qual));
    else if (qual == "experiment.seed") cfg.base_seed = static_cast<std::uint64_t>(to_int(value, qual));
    else if (qual == "experiment.seeds") {
      cfg.seeds.clear();
      for (int s : to_int_list(value, qual)) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    } else if (qual == "experiment.subsample_users")
      cfg.subsample_users = static_cast<int>(to_int(value, qual));
    else if (qual == "experiment.include_ties") cfg.include_ties = to_bool(value, qual);
    else if (qual == "model.embedding") {
      cfg.train.dims.d = static_cast<int>(to_int(value, qual));
      cfg.train.dims.f = cfg.train.dims.d;
    } else if (qual == "model.head1") cfg.train.dims.head1 = static_cast<int>(to_int(value, qual));
    else if (qual == "model.head2") cfg.train.dims.head2 = static_cast<int>(to_int(value, qual));
    else if (qual == "model.beta_item_sim") cfg.train.beta_item_sim = to_real(value, qual);
    else if (qual == "model.beta_user_sim") cfg.train.beta_user_sim = to_real(value, qual);
    else if (qual == "model.beta_user_item") cfg.train.beta_user_item = to_real(value, qual);
    else if (qual == "model.beta_user_pref") cfg.train.beta_user_pref = to_real(value, qual);
    else if (qual == "model.beta_sim_degree_mult") cfg.beta_sim_degree_mult = to_real(value, qual);
    else if (qual == "clustering.user_clusters") cfg.user_clusters = static_cast<int>(to_int(value, qual));
    else if (qual == "clustering.item_clusters") cfg.item_clusters = static_cast<int>(to_int(value, qual));
    else if (qual == "training.lr") cfg.train.lr = to_real(value, qual);
    else if (qual == "training.l2") cfg.train.l2 = to_real(value, qual);
    else if (qual == "training.dropout_mid") cfg.train.dropout_mid = to_real(value, qual);
    else if (qual == "training.dropout_last") cfg.train.dropout_last = to_real(value, qual);
    else if (qual == "training.batch") cfg.train.batch_edges = static_cast<int>(to_int(value, qual));
    else if (qual == "training.epochs") cfg.train.epochs = static_cast<int>(to_int(value, qual));
    else if (qual == "training.patience") cfg.train.patience = static_cast<int>(to_int(value, qual));
    else if (qual == "training.folds") cfg.train.folds = static_cast<int>(to_int(value, qual));
    else if (qual == "training.pretrain") cfg.train.pretrain = to_bool(value, qual);
    else if (qual == "training.bn_momentum") cfg.train.bn_momentum = to_real(value, qual);
    else if (qual == "training.bn_eps") cfg.train.bn_eps = to_real(value, qual);
    else if (qual == "training.nmf_iters") cfg.nmf_iters = static_cast<int>(to_int(value, qual));
    else if (qual == "training.nmf_tol") cfg.nmf_tol = to_real(value, qual);
    else if (qual == "training.verbose") cfg.train.verbose = to_bool(value, qual);
    else if (qual == "eval.topn") cfg.topn_list = to_int_list(value, qual);
    else if (qual == "eval.eq7") {
      if (value == "candidates") cfg.eq7 = Eq7Denominator::kCandidates;
      else if (value == "rated") cfg.eq7 = Eq7Denominator::kRatedItems;
      else throw Error("config: eq7 must be candidates or rated");
    } else if (qual == "eval.threads") cfg.eval_threads = static_cast<int>(to_int(value, qual));
    else if (qual == "output.dir") cfg.output_dir = value;
    else if (qual == "output.parallel_runs") cfg.parallel_runs = static_cast<int>(to_int(value, qual));
    else if (qual == "output.save_checkpoints") cfg.save_checkpoint_dir = value;
    else throw Error(origin + " line " + std::to_string(lineno) + ": unknown key " + qual);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace pgrec
