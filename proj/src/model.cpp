#include "pgrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <unordered_map>

#include "pgrec/kernels.hpp"

namespace pgrec {

namespace {

void glorot_fill(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / (m.rows + m.cols));
  for (double& x : m.v) x = rng.uniform(-limit, limit);
}

Matrix gather(const Matrix& src, const std::vector<int>& rows) {
  Matrix out(static_cast<int>(rows.size()), src.cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(src.row(rows[r]), src.row(rows[r]) + src.cols, out.row(static_cast<int>(r)));
  return out;
}

}  // namespace

void ModelParams::init(const ModelDims& d, std::uint64_t seed, double bn_momentum,
                       double bn_eps) {
  require(d.d % 2 == 0, "ModelParams: embedding width must be even");
  require(d.f == d.d, "ModelParams: NMF rank must equal the embedding width");
  dims = d;
  const int half = d.d / 2;
  Rng rng(seed);
  auto weight = [&](const char* name, int r, int c) {
    Parameter p(name, Matrix(r, c));
    glorot_fill(p.value, rng);
    return p;
  };
  auto fill = [&](const char* name, int r, int c, double x) {
    return Parameter(name, Matrix::full(r, c, x));
  };
  theta_item_sim = weight("theta_item_sim", d.f, half);
  theta_item_user = weight("theta_item_user", d.f, half);
  theta_user_sim = weight("theta_user_sim", d.f, half);
  theta_user_pref = weight("theta_user_pref", d.d, half);
  halve_w = weight("halve_w", 2 * d.d, d.d);
  halve_b = fill("halve_b", 1, d.d, 0.0);
  head_w1 = weight("head_w1", 2 * d.d, d.head1);
  head_b1 = fill("head_b1", 1, d.head1, 0.0);
  head_g1 = fill("head_g1", 1, d.head1, 1.0);
  head_s1 = fill("head_s1", 1, d.head1, 0.0);
  head_w2 = weight("head_w2", d.head1, d.head2);
  head_b2 = fill("head_b2", 1, d.head2, 0.0);
  head_g2 = fill("head_g2", 1, d.head2, 1.0);
  head_s2 = fill("head_s2", 1, d.head2, 0.0);
  head_w3 = weight("head_w3", d.head2, 1);
  head_b3 = fill("head_b3", 1, 1, 0.0);
  bn1 = BatchNormState(d.head1);
  bn2 = BatchNormState(d.head2);
  bn1.momentum = bn2.momentum = bn_momentum;
  bn1.eps = bn2.eps = bn_eps;
  // dropout rates are owned by the caller's config; init leaves them as set
}

std::vector<Parameter*> ModelParams::all() {
  return {&theta_item_sim, &theta_item_user, &theta_user_sim, &theta_user_pref,
          &halve_w,        &halve_b,         &head_w1,        &head_b1,
          &head_g1,        &head_s1,         &head_w2,        &head_b2,
          &head_g2,        &head_s2,         &head_w3,        &head_b3};
}

std::vector<const Parameter*> ModelParams::all() const {
  auto mutable_list = const_cast<ModelParams*>(this)->all();
  return {mutable_list.begin(), mutable_list.end()};
}

std::vector<Parameter*> ModelParams::l2_weights() {
  return {&theta_item_sim, &theta_item_user, &theta_user_sim, &theta_user_pref,
          &halve_w,        &head_w1,         &head_w2,        &head_w3};
}

struct PgrecModel::Batch {
  std::vector<int> users;  // B
  std::vector<int> prefs;  // Q, sorted unique pref ids
  std::vector<int> items;  // sorted unique items referenced by Q
  std::vector<int> pair_first_pos, pair_second_pos;  // per Q, positions in items
  SparseCsr a_bq, a_bq_t;  // restricted normalized user-pref operator
  Matrix user_self;        // B x f: (beta / deg_u) * x_users row
  std::vector<int> e_user_pos, e_pref_pos;
  std::vector<double> e_target;
};

PgrecModel::PgrecModel(const PrefGraph& graph, const SimilarityGraph& user_sim,
                       const SimilarityGraph& item_sim, const Factorization& nmf,
                       TrainConfig config)
    : graph_(&graph), config_(std::move(config)) {
  const int n = graph.n_users, m = graph.n_items;
  require(nmf.user_factors.rows == n && nmf.item_factors.cols == m,
          "PgrecModel: factorization does not match the graph");
  require(nmf.rank == config_.dims.f, "PgrecModel: factorization rank differs from dims.f");
  require(!graph.edge_pref.empty(), "PgrecModel: no training user-preference edges");
  params_.init(config_.dims, derive_seed(config_.seed, "init"), config_.bn_momentum,
               config_.bn_eps);
  params_.dropout_mid = config_.dropout_mid;
  params_.dropout_last = config_.dropout_last;

  x_users_ = nmf.user_factors;
  x_items_ = transposed(nmf.item_factors);

  // Item-similarity branch constant.
  {
    const SparseCsr w = item_sim.to_csr();
    require(w.rows == m, "PgrecModel: item similarity graph node count mismatch");
    const double beta = config_.beta_item_sim > 0 ? config_.beta_item_sim : default_beta(w);
    m_item_sim_ = normalized_operator(w, beta).multiply(x_items_);
  }
  // User-similarity branch constant.
  {
    const SparseCsr w = user_sim.to_csr();
    require(w.rows == n, "PgrecModel: user similarity graph node count mismatch");
    const double beta = config_.beta_user_sim > 0 ? config_.beta_user_sim : default_beta(w);
    m_user_sim_ = normalized_operator(w, beta).multiply(x_users_);
  }
  // User-item bipartite block; item rows only are kept.
  {
    std::vector<Triplet> tri;
    tri.reserve(graph.ui_item.size() * 2);
    for (int u = 0; u < n; ++u)
      for (int e = graph.ui_ptr[u]; e < graph.ui_ptr[u + 1]; ++e) {
        tri.push_back({u, n + graph.ui_item[e], graph.ui_rating[e]});
        tri.push_back({n + graph.ui_item[e], u, graph.ui_rating[e]});
      }
    const SparseCsr w = SparseCsr::from_triplets(n + m, n + m, tri);
    const double beta = config_.beta_user_item > 0 ? config_.beta_user_item : default_beta(w);
    Matrix stacked(n + m, config_.dims.f);
    std::copy(x_users_.v.begin(), x_users_.v.end(), stacked.v.begin());
    std::copy(x_items_.v.begin(), x_items_.v.end(),
              stacked.v.begin() + static_cast<std::size_t>(n) * config_.dims.f);
    const Matrix mixed = normalized_operator(w, beta).multiply(stacked);
    m_item_user_ = Matrix(m, config_.dims.f);
    std::copy(mixed.v.begin() + static_cast<std::size_t>(n) * config_.dims.f, mixed.v.end(),
              m_item_user_.v.begin());
  }
  // User-preference block self-loop weight.
  if (config_.beta_user_pref > 0) {
    beta_up_ = config_.beta_user_pref;
  } else {
    double max_abs = 0.0;
    for (double w : graph.edge_weight) max_abs = std::max(max_abs, std::fabs(w));
    beta_up_ = 1.0 + max_abs;
  }
  std::vector<char> keep(graph.edge_pref.size(), 1);
  full_ = make_edge_set(keep);
}

PgrecModel::EdgeSet PgrecModel::make_edge_set(const std::vector<char>& keep) const {
  const PrefGraph& g = *graph_;
  EdgeSet set;
  set.user_ptr.assign(g.n_users + 1, 0);
  set.user_deg.assign(g.n_users, beta_up_);
  set.pref_deg.assign(g.pref_count(), beta_up_);
  for (int u = 0; u < g.n_users; ++u)
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
      if (!keep[e]) continue;
      set.user_ptr[u + 1]++;
      set.pref.push_back(g.edge_pref[e]);
      set.w.push_back(g.edge_weight[e]);
      set.user_deg[u] += std::fabs(g.edge_weight[e]);
      set.pref_deg[g.edge_pref[e]] += std::fabs(g.edge_weight[e]);
    }
  for (int u = 0; u < g.n_users; ++u) set.user_ptr[u + 1] += set.user_ptr[u];
  return set;
}

PgrecModel::Batch PgrecModel::make_batch(const std::vector<int>& users, const EdgeSet& prop,
                                         const EdgeSet* targets) const {
  const PrefGraph& g = *graph_;
  Batch b;
  b.users = users;

  std::unordered_map<int, int> pref_pos;
  auto touch_pref = [&](int p) {
    if (pref_pos.emplace(p, static_cast<int>(b.prefs.size())).second) b.prefs.push_back(p);
  };
  for (int u : users) {
    for (int e = prop.user_ptr[u]; e < prop.user_ptr[u + 1]; ++e) touch_pref(prop.pref[e]);
    if (targets)
      for (int e = targets->user_ptr[u]; e < targets->user_ptr[u + 1]; ++e)
        touch_pref(targets->pref[e]);
  }

  std::unordered_map<int, int> item_pos;
  b.pair_first_pos.reserve(b.prefs.size());
  b.pair_second_pos.reserve(b.prefs.size());
  auto touch_item = [&](int i) {
    const auto [it, inserted] = item_pos.emplace(i, static_cast<int>(b.items.size()));
    if (inserted) b.items.push_back(i);
    return it->second;
  };
  for (int p : b.prefs) {
    b.pair_first_pos.push_back(touch_item(g.pref_pair[p].first));
    b.pair_second_pos.push_back(touch_item(g.pref_pair[p].second));
  }

  // Restricted normalized operator rows(users) x cols(prefs).
  std::vector<Triplet> tri;
  for (std::size_t r = 0; r < users.size(); ++r) {
    const int u = users[r];
    for (int e = prop.user_ptr[u]; e < prop.user_ptr[u + 1]; ++e) {
      const int p = prop.pref[e];
      tri.push_back({static_cast<int>(r), pref_pos.at(p),
                     prop.w[e] / std::sqrt(prop.user_deg[u] * prop.pref_deg[p])});
    }
  }
  b.a_bq = SparseCsr::from_triplets(static_cast<int>(users.size()),
                                    static_cast<int>(b.prefs.size()), tri);
  b.a_bq_t = b.a_bq.transposed();

  b.user_self = Matrix(static_cast<int>(users.size()), config_.dims.f);
  for (std::size_t r = 0; r < users.size(); ++r) {
    const double s = beta_up_ / prop.user_deg[users[r]];
    const double* src = x_users_.row(users[r]);
    double* dst = b.user_self.row(static_cast<int>(r));
    for (int c = 0; c < config_.dims.f; ++c) dst[c] = s * src[c];
  }

  if (targets) {
    for (std::size_t r = 0; r < users.size(); ++r) {
      const int u = users[r];
      for (int e = targets->user_ptr[u]; e < targets->user_ptr[u + 1]; ++e) {
        b.e_user_pos.push_back(static_cast<int>(r));
        b.e_pref_pos.push_back(pref_pos.at(targets->pref[e]));
        b.e_target.push_back(targets->w[e]);
      }
    }
  }
  return b;
}

GradientTape::ValueId PgrecModel::build_item_block(GradientTape& t,
                                                   const std::vector<int>& items) {
  const auto f_is =
      t.relu(t.matmul(t.constant(gather(m_item_sim_, items)), t.param(params_.theta_item_sim)));
  const auto f_iu =
      t.relu(t.matmul(t.constant(gather(m_item_user_, items)), t.param(params_.theta_item_user)));
  return t.concat_cols(f_is, f_iu);
}

GradientTape::ValueId PgrecModel::build_head(GradientTape& t, GradientTape::ValueId joined,
                                             bool train, Rng* rng) {
  auto h = t.add_row(t.matmul(joined, t.param(params_.head_w1)), t.param(params_.head_b1));
  h = t.batch_norm(h, t.param(params_.head_g1), t.param(params_.head_s1), params_.bn1, train);
  h = t.relu(h);
  if (train && params_.dropout_mid > 0) h = t.dropout(h, params_.dropout_mid, *rng);
  h = t.add_row(t.matmul(h, t.param(params_.head_w2)), t.param(params_.head_b2));
  h = t.batch_norm(h, t.param(params_.head_g2), t.param(params_.head_s2), params_.bn2, train);
  h = t.relu(h);
  if (train && params_.dropout_last > 0) h = t.dropout(h, params_.dropout_last, *rng);
  return t.add_row(t.matmul(h, t.param(params_.head_w3)), t.param(params_.head_b3));
}

GradientTape::ValueId PgrecModel::build_forward(GradientTape& t, const Batch& b, bool train,
                                                Rng* rng) {
  const auto f_i = build_item_block(t, b.items);
  const auto z =
      t.concat_cols(t.gather_rows(f_i, b.pair_first_pos), t.gather_rows(f_i, b.pair_second_pos));
  const auto f_p =
      t.relu(t.add_row(t.matmul(z, t.param(params_.halve_w)), t.param(params_.halve_b)));

  const auto agg = t.sparse_matmul(&b.a_bq, &b.a_bq_t, f_p);
  const auto pre = t.add(t.constant(b.user_self), agg);
  const auto f_up = t.relu(t.matmul(pre, t.param(params_.theta_user_pref)));
  const auto f_us = t.relu(
      t.matmul(t.constant(gather(m_user_sim_, b.users)), t.param(params_.theta_user_sim)));
  const auto f_u = t.concat_cols(f_us, f_up);

  const auto joined =
      t.concat_cols(t.gather_rows(f_u, b.e_user_pos), t.gather_rows(f_p, b.e_pref_pos));
  return build_head(t, joined, train, rng);
}

double PgrecModel::loss_on_edges(const std::vector<int>& users, const std::vector<int>& prefs,
                                 const std::vector<double>& targets, bool train_mode,
                                 bool backward, Rng* dropout_rng) {
  require(users.size() == prefs.size() && users.size() == targets.size(),
          "loss_on_edges: length mismatch");
  require(!users.empty(), "loss_on_edges: empty edge list");
  EdgeSet tmp;
  tmp.user_ptr.assign(graph_->n_users + 1, 0);
  tmp.user_deg.assign(graph_->n_users, beta_up_);
  tmp.pref_deg.assign(graph_->pref_count(), beta_up_);
  std::vector<std::size_t> order(users.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t bb) { return users[a] < users[bb]; });
  for (std::size_t i : order) {
    tmp.user_ptr[users[i] + 1]++;
    tmp.pref.push_back(prefs[i]);
    tmp.w.push_back(targets[i]);
  }
  for (int u = 0; u < graph_->n_users; ++u) tmp.user_ptr[u + 1] += tmp.user_ptr[u];

  std::vector<int> unique_users = users;
  std::sort(unique_users.begin(), unique_users.end());
  unique_users.erase(std::unique(unique_users.begin(), unique_users.end()), unique_users.end());

  const Batch b = make_batch(unique_users, full_, &tmp);
  GradientTape t;
  const auto pred = build_forward(t, b, train_mode, dropout_rng);
  const auto diff = t.sub(pred, t.constant([&] {
    Matrix m(static_cast<int>(b.e_target.size()), 1);
    std::copy(b.e_target.begin(), b.e_target.end(), m.v.begin());
    return m;
  }()));
  auto loss = t.sqrt_elem(t.mean_all(t.mul(diff, diff)));
  if (config_.l2 > 0)
    for (Parameter* w : params_.l2_weights())
      loss = t.add(loss, t.scale(t.sum_squares(t.param(*w)), config_.l2));
  const double value = t.value(loss).v[0];
  if (backward) {
    for (Parameter* p : params_.all()) p->zero_grad();
    t.backward(loss);
  }
  return value;
}

PgrecModel::PhaseOutcome PgrecModel::run_phase(const EdgeSet& prop, const EdgeSet& targets,
                                               const EdgeSet* val, int epochs, int patience,
                                               Rng& rng, const std::string& tag) {
  PhaseOutcome out;
  AdamState adam;
  adam.lr = config_.lr;
  adam.beta1 = config_.adam_beta1;
  adam.beta2 = config_.adam_beta2;
  adam.eps = config_.adam_eps;
  adam.init(params_.all());

  std::vector<int> active_users;
  for (int u = 0; u < graph_->n_users; ++u)
    if (targets.user_ptr[u + 1] > targets.user_ptr[u]) active_users.push_back(u);
  require(!active_users.empty(), "train: no users with target edges");

  ModelParams best;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(active_users);
    double sse = 0.0;
    double loss_weighted = 0.0;
    std::size_t edge_count = 0;
    std::size_t at = 0;
    while (at < active_users.size()) {
      std::vector<int> pack;
      int packed_edges = 0;
      while (at < active_users.size() &&
             (pack.empty() || packed_edges < config_.batch_edges)) {
        const int u = active_users[at];
        const int mine = targets.user_ptr[u + 1] - targets.user_ptr[u];
        if (!pack.empty() && packed_edges + mine > config_.batch_edges) break;
        pack.push_back(u);
        packed_edges += mine;
        ++at;
      }
      const Batch b = make_batch(pack, prop, &targets);
      GradientTape t;
      const auto pred = build_forward(t, b, true, &rng);
      Matrix target_m(static_cast<int>(b.e_target.size()), 1);
      std::copy(b.e_target.begin(), b.e_target.end(), target_m.v.begin());
      const auto diff = t.sub(pred, t.constant(std::move(target_m)));
      const auto mse = t.mean_all(t.mul(diff, diff));
      auto loss = t.sqrt_elem(mse);
      if (config_.l2 > 0)
        for (Parameter* w : params_.l2_weights())
          loss = t.add(loss, t.scale(t.sum_squares(t.param(*w)), config_.l2));
      const double loss_value = t.value(loss).v[0];
      if (!std::isfinite(loss_value))
        throw Error(std::string("train: loss diverged in phase ") + tag + " at epoch " +
                    std::to_string(epoch));
      sse += t.value(mse).v[0] * static_cast<double>(b.e_target.size());
      loss_weighted += loss_value * static_cast<double>(b.e_target.size());
      edge_count += b.e_target.size();
      for (Parameter* p : params_.all()) p->zero_grad();
      t.backward(loss);
      adam_step(params_.all(), adam);
    }

    EpochLog log;
    log.train_rmse = std::sqrt(sse / static_cast<double>(edge_count));
    log.train_loss = loss_weighted / static_cast<double>(edge_count);
    if (val) {
      log.val_rmse = validation_rmse(prop, *val);
      if (log.val_rmse < best_val - 1e-12) {
        best_val = log.val_rmse;
        best = params_;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    out.history.push_back(log);
    if (config_.verbose)
      std::cerr << tag << " epoch " << epoch << " rmse " << log.train_rmse
                << (val ? " val " + std::to_string(log.val_rmse) : "") << '\n';
    if (val && since_best >= patience && patience > 0) break;
  }

  if (val && std::isfinite(best_val)) {
    params_ = best;
    out.best_val = best_val;
  }
  return out;
}

double PgrecModel::validation_rmse(const EdgeSet& prop, const EdgeSet& val) {
  std::vector<int> users;
  for (int u = 0; u < graph_->n_users; ++u)
    if (val.user_ptr[u + 1] > val.user_ptr[u]) users.push_back(u);
  double sse = 0.0;
  std::size_t count = 0;
  std::size_t at = 0;
  while (at < users.size()) {
    std::vector<int> pack;
    int packed = 0;
    while (at < users.size() && (pack.empty() || packed < config_.batch_edges)) {
      const int u = users[at];
      const int mine = val.user_ptr[u + 1] - val.user_ptr[u];
      if (!pack.empty() && packed + mine > config_.batch_edges) break;
      pack.push_back(u);
      packed += mine;
      ++at;
    }
    const Batch b = make_batch(pack, prop, &val);
    GradientTape t;
    const auto pred = build_forward(t, b, false, nullptr);
    const Matrix& pv = t.value(pred);
    for (std::size_t e = 0; e < b.e_target.size(); ++e) {
      const double d = pv.v[e] - b.e_target[e];
      sse += d * d;
    }
    count += b.e_target.size();
  }
  return std::sqrt(sse / static_cast<double>(count));
}

TrainResult PgrecModel::train() {
  TrainResult out;
  if (config_.epochs <= 0) return out;

  if (config_.pretrain && config_.folds >= 2) {
    const std::size_t edges = graph_->edge_pref.size();
    std::vector<std::size_t> order(edges);
    for (std::size_t i = 0; i < edges; ++i) order[i] = i;
    Rng fold_rng(derive_seed(config_.seed, "folds"));
    fold_rng.shuffle(order);
    std::vector<int> fold_of(edges);
    for (std::size_t i = 0; i < edges; ++i) fold_of[order[i]] = static_cast<int>(i % config_.folds);

    ModelParams best;
    double best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k < config_.folds; ++k) {
      std::vector<char> keep(edges);
      for (std::size_t i = 0; i < edges; ++i) keep[i] = fold_of[i] != k;
      const EdgeSet prop = make_edge_set(keep);
      for (std::size_t i = 0; i < edges; ++i) keep[i] = fold_of[i] == k;
      const EdgeSet holdout = make_edge_set(keep);

      params_.init(config_.dims, derive_seed(config_.seed, "fold-init-" + std::to_string(k)),
                   config_.bn_momentum, config_.bn_eps);
      params_.dropout_mid = config_.dropout_mid;
      params_.dropout_last = config_.dropout_last;
      Rng rng(derive_seed(config_.seed, "fold-run-" + std::to_string(k)));
      PhaseOutcome fold = run_phase(prop, prop, holdout.count() > 0 ? &holdout : nullptr,
                                    config_.epochs, config_.patience, rng,
                                    "fold " + std::to_string(k));
      out.fold_history.push_back(std::move(fold.history));
      if (fold.best_val >= 0 && fold.best_val < best_val) {
        best_val = fold.best_val;
        best = params_;
        out.best_fold = k;
      }
    }
    if (out.best_fold >= 0) {
      params_ = best;
      out.best_val_rmse = best_val;
    }
  }

  Rng rng(derive_seed(config_.seed, "final-run"));
  PhaseOutcome last = run_phase(full_, full_, nullptr, config_.epochs, 0, rng, "final");
  out.history = std::move(last.history);
  return out;
}

EmbeddingTable PgrecModel::item_reprs() {
  std::vector<int> items(graph_->n_items);
  for (int i = 0; i < graph_->n_items; ++i) items[i] = i;
  GradientTape t;
  const auto f_i = build_item_block(t, items);
  return {NodeKind::kItem, t.value(f_i)};
}

Matrix PgrecModel::pref_reprs(const Matrix& item_values,
                              std::span<const std::pair<int, int>> pairs) {
  Matrix out(static_cast<int>(pairs.size()), config_.dims.d);
  const std::size_t chunk = 8192;
  for (std::size_t start = 0; start < pairs.size(); start += chunk) {
    const std::size_t stop = std::min(pairs.size(), start + chunk);
    Matrix z(static_cast<int>(stop - start), 2 * config_.dims.d);
    for (std::size_t p = start; p < stop; ++p) {
      require(pairs[p].first < pairs[p].second, "pref_reprs: pair not canonical");
      double* dst = z.row(static_cast<int>(p - start));
      std::copy(item_values.row(pairs[p].first), item_values.row(pairs[p].first) + item_values.cols,
                dst);
      std::copy(item_values.row(pairs[p].second),
                item_values.row(pairs[p].second) + item_values.cols, dst + item_values.cols);
    }
    GradientTape t;
    const auto f_p = t.relu(
        t.add_row(t.matmul(t.constant(std::move(z)), t.param(params_.halve_w)),
                  t.param(params_.halve_b)));
    const Matrix& val = t.value(f_p);
    std::copy(val.v.begin(), val.v.end(), out.row(static_cast<int>(start)));
  }
  return out;
}

EmbeddingTable PgrecModel::user_reprs(const EmbeddingTable& items) {
  require(items.values.rows == graph_->n_items, "user_reprs: bad item table");
  EmbeddingTable out{NodeKind::kUser, Matrix(graph_->n_users, config_.dims.d)};
  std::size_t at = 0;
  std::vector<int> all_users(graph_->n_users);
  for (int u = 0; u < graph_->n_users; ++u) all_users[u] = u;
  while (at < all_users.size()) {
    std::vector<int> pack;
    std::size_t packed = 0;
    while (at < all_users.size() && (pack.empty() || packed < 16384)) {
      const int u = all_users[at];
      pack.push_back(u);
      packed += static_cast<std::size_t>(full_.user_ptr[u + 1] - full_.user_ptr[u]);
      ++at;
    }
    const Batch b = make_batch(pack, full_, nullptr);
    GradientTape t;
    // Item block restricted to the chunk's referenced items.
    const auto f_i = build_item_block(t, b.items);
    const auto z = t.concat_cols(t.gather_rows(f_i, b.pair_first_pos),
                                 t.gather_rows(f_i, b.pair_second_pos));
    const auto f_p =
        t.relu(t.add_row(t.matmul(z, t.param(params_.halve_w)), t.param(params_.halve_b)));
    const auto agg = t.sparse_matmul(&b.a_bq, &b.a_bq_t, f_p);
    const auto pre = t.add(t.constant(b.user_self), agg);
    const auto f_up = t.relu(t.matmul(pre, t.param(params_.theta_user_pref)));
    const auto f_us = t.relu(
        t.matmul(t.constant(gather(m_user_sim_, b.users)), t.param(params_.theta_user_sim)));
    const auto f_u = t.concat_cols(f_us, f_up);
    const Matrix& val = t.value(f_u);
    for (std::size_t r = 0; r < pack.size(); ++r)
      std::copy(val.row(static_cast<int>(r)), val.row(static_cast<int>(r)) + val.cols,
                out.values.row(pack[r]));
  }
  return out;
}

EmbeddingTable PgrecModel::user_reprs_from_pref_table(const EmbeddingTable& prefs) {
  require(prefs.values.rows == graph_->pref_count(), "user_reprs_from_pref_table: bad table");
  const int n = graph_->n_users;
  std::vector<Triplet> tri;
  tri.reserve(full_.count());
  for (int u = 0; u < n; ++u)
    for (int e = full_.user_ptr[u]; e < full_.user_ptr[u + 1]; ++e)
      tri.push_back({u, full_.pref[e],
                     full_.w[e] / std::sqrt(full_.user_deg[u] * full_.pref_deg[full_.pref[e]])});
  const SparseCsr a = SparseCsr::from_triplets(n, graph_->pref_count(), tri);
  const SparseCsr a_t = a.transposed();

  Matrix self(n, config_.dims.f);
  for (int u = 0; u < n; ++u) {
    const double s = beta_up_ / full_.user_deg[u];
    for (int c = 0; c < config_.dims.f; ++c) self.at(u, c) = s * x_users_.at(u, c);
  }

  GradientTape t;
  const auto agg = t.sparse_matmul(&a, &a_t, t.constant(prefs.values));
  const auto pre = t.add(t.constant(std::move(self)), agg);
  const auto f_up = t.relu(t.matmul(pre, t.param(params_.theta_user_pref)));
  const auto f_us =
      t.relu(t.matmul(t.constant(m_user_sim_), t.param(params_.theta_user_sim)));
  const auto f_u = t.concat_cols(f_us, f_up);
  return {NodeKind::kUser, t.value(f_u)};
}

std::vector<double> PgrecModel::predict(const Matrix& user_rows, const Matrix& pref_rows) {
  require(user_rows.rows == pref_rows.rows, "predict: row count mismatch");
  require(user_rows.cols == config_.dims.d && pref_rows.cols == config_.dims.d,
          "predict: width mismatch");
  GradientTape t;
  const auto joined = t.concat_cols(t.constant(user_rows), t.constant(pref_rows));
  const auto pred = build_head(t, joined, false, nullptr);
  const Matrix& val = t.value(pred);
  return {val.v.begin(), val.v.end()};
}

EmbeddingTable assemble_item_reprs(PgrecModel& model) { return model.item_reprs(); }

EmbeddingTable assemble_pref_reprs(PgrecModel& model, const EmbeddingTable& items) {
  require(items.kind == NodeKind::kItem, "assemble_pref_reprs: wrong table kind");
  return {NodeKind::kPreference, model.pref_reprs(items.values, model.graph().pref_pair)};
}

EmbeddingTable assemble_user_reprs(PgrecModel& model, const EmbeddingTable& prefs) {
  require(prefs.kind == NodeKind::kPreference, "assemble_user_reprs: wrong table kind");
  return model.user_reprs_from_pref_table(prefs);
}

double predict_weight(std::span<const double> user_vec, std::span<const double> pref_vec,
                      ModelParams& params, bool train_mode, Rng* dropout_rng) {
  require(user_vec.size() == pref_vec.size(), "predict_weight: width mismatch");
  require(static_cast<int>(user_vec.size()) == params.dims.d, "predict_weight: width mismatch");
  GradientTape t;
  Matrix joined(1, 2 * params.dims.d);
  std::copy(user_vec.begin(), user_vec.end(), joined.v.begin());
  std::copy(pref_vec.begin(), pref_vec.end(), joined.v.begin() + params.dims.d);
  auto h = t.add_row(t.matmul(t.constant(std::move(joined)), t.param(params.head_w1)),
                     t.param(params.head_b1));
  h = t.batch_norm(h, t.param(params.head_g1), t.param(params.head_s1), params.bn1, train_mode);
  h = t.relu(h);
  if (train_mode && dropout_rng && params.dropout_mid > 0)
    h = t.dropout(h, params.dropout_mid, *dropout_rng);
  h = t.add_row(t.matmul(h, t.param(params.head_w2)), t.param(params.head_b2));
  h = t.batch_norm(h, t.param(params.head_g2), t.param(params.head_s2), params.bn2, train_mode);
  h = t.relu(h);
  if (train_mode && dropout_rng && params.dropout_last > 0)
    h = t.dropout(h, params.dropout_last, *dropout_rng);
  h = t.add_row(t.matmul(h, t.param(params.head_w3)), t.param(params.head_b3));
  return t.value(h).v[0];
}

}  // namespace pgrec
