#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pgrec/checkpoint.hpp"
#include "pgrec/model.hpp"
#include "pgrec/propagation.hpp"

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

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& x : m.v) x = rng.uniform(lo, hi);
  return m;
}

// Shared toy fixture: 5 users, 6 items, mixed ratings.
struct Toy {
  RatingStore train;
  SimilarityGraph user_sim;
  SimilarityGraph item_sim;
  Factorization fac;
  PrefGraph graph;

  explicit Toy(bool with_sims = true)
      : train(store_from(5, 6,
                         {{0, 0, 3}, {0, 1, 4}, {0, 2, 5}, {1, 0, 3}, {1, 1, 5}, {1, 3, 2},
                          {2, 0, 4}, {2, 1, 5}, {2, 2, 3}, {2, 3, 3}, {3, 2, 1}, {3, 4, 4},
                          {3, 5, 5}, {4, 1, 2}, {4, 4, 3}, {4, 5, 1}})),
        user_sim(SimilarityGraph::empty(NodeKind::kUser, 5)),
        item_sim(SimilarityGraph::empty(NodeKind::kItem, 6)),
        graph(build_pref_graph(train, {}, {}, false)) {
    if (with_sims) {
      user_sim.edges = {{0, 1, 2}, {1, 2, 1}, {2, 3, 3}, {0, 4, 1}};
      item_sim.edges = {{0, 1, 2}, {1, 2, 2}, {3, 4, 1}, {4, 5, 2}, {0, 5, 1}};
    }
    NmfOptions opt;
    opt.rank = 4;
    opt.max_iters = 40;
    opt.seed = 77;
    fac = nmf_factorize(train, opt);
  }

  TrainConfig config(std::uint64_t seed = 5) const {
    TrainConfig c;
    c.dims = {4, 4, 6, 4};
    c.lr = 0.01;
    c.l2 = 0.001;
    c.dropout_mid = 0.0;
    c.dropout_last = 0.0;
    c.batch_edges = 64;
    c.epochs = 0;
    c.pretrain = false;
    c.seed = seed;
    return c;
  }
};

}  // namespace

TEST_CASE("propagate matches the dense formula on random mixed-sign graphs") {
  Rng rng(404);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(19));
    std::vector<Triplet> tri;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng.uniform() < 0.4) {
          const double w = rng.uniform(-3.0, 3.0);
          tri.push_back({a, b, w});
          tri.push_back({b, a, w});
        }
    const SparseCsr weights = SparseCsr::from_triplets(n, n, tri);
    PropagationLayer layer;
    layer.beta = default_beta(weights);
    const int in = 1 + static_cast<int>(rng.next_below(5));
    const int out = 1 + static_cast<int>(rng.next_below(4));
    layer.theta = random_matrix(rng, in, out, -2, 2);
    const Matrix signals = random_matrix(rng, n, in, -2, 2);

    const Matrix got = propagate(weights, signals, layer);
    const Matrix want = oracles::dense_propagate(n, tri, layer.beta, signals, layer.theta);
    REQUIRE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(std::fabs(got.v[i] - want.v[i]) <= 1e-12);
  }
}

TEST_CASE("isolated node reduces to the rectified self transform") {
  // Single node, no edges: beta/(sqrt(beta)*sqrt(beta)) = 1.
  const SparseCsr weights(1, 1);
  PropagationLayer layer;
  layer.beta = 2.5;
  layer.theta = Matrix(2, 2);
  layer.theta.at(0, 0) = 1.0;
  layer.theta.at(0, 1) = -2.0;
  layer.theta.at(1, 0) = 0.5;
  layer.theta.at(1, 1) = 3.0;
  Matrix x(1, 2);
  x.at(0, 0) = 2.0;
  x.at(0, 1) = -1.0;
  const Matrix y = propagate(weights, x, layer);
  // x theta = (2*1 - 1*0.5, 2*-2 + -1*3) = (1.5, -7): rectifier zeroes the second.
  CHECK(y.at(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(y.at(0, 1) == 0.0);
}

TEST_CASE("negative pre-activations rectify to exactly zero") {
  const SparseCsr weights(3, 3);
  PropagationLayer layer;
  layer.beta = 1.0;
  layer.theta = Matrix::full(2, 3, -1.0);
  const Matrix x = Matrix::full(3, 2, 1.0);
  const Matrix y = propagate(weights, x, layer);
  for (double v : y.v) CHECK(v == 0.0);
}

TEST_CASE("propagate validates dimensions") {
  const SparseCsr weights(3, 3);
  PropagationLayer layer;
  layer.beta = 1.0;
  layer.theta = Matrix(2, 2);
  CHECK_THROWS_AS(propagate(weights, Matrix(2, 2), layer), Error);   // wrong rows
  CHECK_THROWS_AS(propagate(weights, Matrix(3, 3), layer), Error);   // theta width
}

TEST_CASE("default beta exceeds every absolute weight") {
  const SparseCsr w = SparseCsr::from_triplets(2, 2, {{0, 1, -4.0}, {1, 0, -4.0}});
  CHECK(default_beta(w) == 5.0);
  CHECK(default_beta(SparseCsr(3, 3)) == 1.0);  // empty graph
}

TEST_CASE("item assembly equals the composition of two propagate calls") {
  const Toy toy;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config());
  const EmbeddingTable items = assemble_item_reprs(model);
  CHECK(items.values.rows == 6);
  CHECK(items.values.cols == 4);  // width d

  // Branch 1: item-similarity propagation of the NMF item vectors.
  const SparseCsr sim = toy.item_sim.to_csr();
  PropagationLayer l1{model.params().theta_item_sim.value, default_beta(sim)};
  const Matrix x_items = transposed(toy.fac.item_factors);
  const Matrix f_is = propagate(sim, x_items, l1);  // 6 x 2

  // Branch 2: the user-item bipartite block over the union node set.
  std::vector<Triplet> tri;
  for (const Rating& r : toy.train.ratings) {
    tri.push_back({r.user, 5 + 1 + r.item - 1, 0.0});  // placeholder, rebuilt below
  }
  tri.clear();
  const int n = 5, m = 6;
  for (const Rating& r : toy.train.ratings) {
    tri.push_back({r.user, n + r.item, r.value});
    tri.push_back({n + r.item, r.user, r.value});
  }
  const SparseCsr block = SparseCsr::from_triplets(n + m, n + m, tri);
  Matrix stacked(n + m, 4);
  const Matrix x_users = toy.fac.user_factors;
  std::copy(x_users.v.begin(), x_users.v.end(), stacked.v.begin());
  std::copy(x_items.v.begin(), x_items.v.end(), stacked.v.begin() + n * 4);
  PropagationLayer l2{model.params().theta_item_user.value, default_beta(block)};
  const Matrix mixed = propagate(block, stacked, l2);

  for (int i = 0; i < m; ++i)
    for (int c = 0; c < 2; ++c) {
      CHECK(items.values.at(i, c) == doctest::Approx(f_is.at(i, c)).epsilon(1e-12));
      CHECK(items.values.at(i, 2 + c) == doctest::Approx(mixed.at(n + i, c)).epsilon(1e-12));
    }
}

TEST_CASE("all-zero initial vectors give all-zero item embeddings") {
  const Toy toy;
  Factorization zero = toy.fac;
  std::fill(zero.user_factors.v.begin(), zero.user_factors.v.end(), 0.0);
  std::fill(zero.item_factors.v.begin(), zero.item_factors.v.end(), 0.0);
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, zero, toy.config());
  const EmbeddingTable items = model.item_reprs();
  for (double v : items.values.v) CHECK(v == 0.0);
}

TEST_CASE("preference assembly is the hand-evaluated concat-then-dense") {
  const Toy toy;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config());
  const EmbeddingTable items = model.item_reprs();
  const EmbeddingTable prefs = assemble_pref_reprs(model, items);
  CHECK(prefs.values.rows == toy.graph.pref_count());
  CHECK(prefs.values.cols == 4);  // halved back to d

  const Matrix& hw = model.params().halve_w.value;
  const Matrix& hb = model.params().halve_b.value;
  for (int p = 0; p < toy.graph.pref_count(); ++p) {
    const auto [i, j] = toy.graph.pref_pair[p];
    CHECK(i < j);  // canonical order fixes the concatenation
    for (int c = 0; c < 4; ++c) {
      double acc = hb.v[c];
      for (int k = 0; k < 4; ++k) {
        acc += items.values.at(i, k) * hw.at(k, c);
        acc += items.values.at(j, k) * hw.at(4 + k, c);
      }
      acc = acc > 0 ? acc : 0;
      CHECK(prefs.values.at(p, c) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("user assembly equals block propagation over the union node set") {
  const Toy toy;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config());
  const EmbeddingTable items = model.item_reprs();
  const EmbeddingTable prefs = assemble_pref_reprs(model, items);
  const EmbeddingTable users = assemble_user_reprs(model, prefs);
  CHECK(users.values.rows == 5);
  CHECK(users.values.cols == 4);

  // Branch 1: user-similarity propagation.
  const SparseCsr sim = toy.user_sim.to_csr();
  PropagationLayer l1{model.params().theta_user_sim.value, default_beta(sim)};
  const Matrix f_us = propagate(sim, toy.fac.user_factors, l1);

  // Branch 2: user-preference bipartite block with the signed weights.
  const int n = 5;
  const int p_count = toy.graph.pref_count();
  std::vector<Triplet> tri;
  for (int u = 0; u < n; ++u)
    for (int e = toy.graph.user_ptr[u]; e < toy.graph.user_ptr[u + 1]; ++e) {
      tri.push_back({u, n + toy.graph.edge_pref[e], toy.graph.edge_weight[e]});
      tri.push_back({n + toy.graph.edge_pref[e], u, toy.graph.edge_weight[e]});
    }
  const SparseCsr block = SparseCsr::from_triplets(n + p_count, n + p_count, tri);
  Matrix stacked(n + p_count, 4);
  std::copy(toy.fac.user_factors.v.begin(), toy.fac.user_factors.v.end(), stacked.v.begin());
  std::copy(prefs.values.v.begin(), prefs.values.v.end(), stacked.v.begin() + n * 4);
  PropagationLayer l2{model.params().theta_user_pref.value, model.beta_user_pref()};
  const Matrix mixed = propagate(block, stacked, l2);

  for (int u = 0; u < n; ++u)
    for (int c = 0; c < 2; ++c) {
      CHECK(users.values.at(u, c) == doctest::Approx(f_us.at(u, c)).epsilon(1e-12));
      CHECK(users.values.at(u, 2 + c) ==
            doctest::Approx(mixed.at(u, c)).epsilon(1e-10).scale(std::max(
                1.0, std::fabs(mixed.at(u, c)))));
    }
}

TEST_CASE("streamed user table equals the full-table assembly") {
  const Toy toy;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config());
  const EmbeddingTable items = model.item_reprs();
  const EmbeddingTable prefs = assemble_pref_reprs(model, items);
  const EmbeddingTable via_table = assemble_user_reprs(model, prefs);
  const EmbeddingTable streamed = model.user_reprs(items);
  REQUIRE(via_table.values.same_shape(streamed.values));
  for (std::size_t i = 0; i < streamed.values.size(); ++i)
    CHECK(streamed.values.v[i] == doctest::Approx(via_table.values.v[i]).epsilon(1e-12));
}

TEST_CASE("user with no similarity edges reduces branch one to the self loop") {
  Toy toy(false);  // empty similarity graphs
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config());
  const EmbeddingTable items = model.item_reprs();
  const EmbeddingTable prefs = assemble_pref_reprs(model, items);
  const EmbeddingTable users = assemble_user_reprs(model, prefs);
  // With no edges the operator is the identity: branch 1 = relu(x theta).
  const Matrix& theta = model.params().theta_user_sim.value;
  for (int u = 0; u < 5; ++u)
    for (int c = 0; c < 2; ++c) {
      double acc = 0;
      for (int k = 0; k < 4; ++k) acc += toy.fac.user_factors.at(u, k) * theta.at(k, c);
      acc = acc > 0 ? acc : 0;
      CHECK(users.values.at(u, c) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("hand-sized head forward matches explicit arithmetic") {
  ModelParams params;
  params.init({2, 2, 2, 2}, 3, 0.9, 1e-5);
  params.dropout_mid = params.dropout_last = 0.0;
  // Known running statistics so eval-mode batch norm is non-trivial.
  params.bn1.running_mean = Matrix::full(1, 2, 0.3);
  params.bn1.running_var = Matrix::full(1, 2, 2.0);
  params.bn2.running_mean = Matrix::full(1, 2, -0.1);
  params.bn2.running_var = Matrix::full(1, 2, 0.5);
  params.head_g1.value = Matrix::full(1, 2, 1.2);
  params.head_s1.value = Matrix::full(1, 2, 0.05);

  const std::vector<double> user_vec{0.4, -0.7};
  const std::vector<double> pref_vec{1.1, 0.2};
  const double got = predict_weight(user_vec, pref_vec, params, false);

  // Explicit loops, no shared code with the tape.
  std::vector<double> z{0.4, -0.7, 1.1, 0.2};
  std::vector<double> h1(2);
  for (int c = 0; c < 2; ++c) {
    double acc = params.head_b1.value.v[c];
    for (int k = 0; k < 4; ++k) acc += z[k] * params.head_w1.value.at(k, c);
    const double xhat = (acc - 0.3) / std::sqrt(2.0 + 1e-5);
    const double bn = 1.2 * xhat + 0.05;
    h1[c] = bn > 0 ? bn : 0;
  }
  std::vector<double> h2(2);
  for (int c = 0; c < 2; ++c) {
    double acc = params.head_b2.value.v[c];
    for (int k = 0; k < 2; ++k) acc += h1[k] * params.head_w2.value.at(k, c);
    const double xhat = (acc + 0.1) / std::sqrt(0.5 + 1e-5);
    const double bn = params.head_g2.value.v[c] * xhat + params.head_s2.value.v[c];
    h2[c] = bn > 0 ? bn : 0;
  }
  double want = params.head_b3.value.v[0];
  for (int k = 0; k < 2; ++k) want += h2[k] * params.head_w3.value.at(k, 0);
  CHECK(got == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("eval-mode prediction is deterministic and dropout-independent") {
  const Toy toy;
  TrainConfig with_dropout = toy.config();
  with_dropout.dropout_mid = 0.4;
  with_dropout.dropout_last = 0.8;
  PgrecModel a(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config());
  PgrecModel b(toy.graph, toy.user_sim, toy.item_sim, toy.fac, with_dropout);
  Rng rng(1);
  const Matrix u = random_matrix(rng, 3, 4);
  const Matrix p = random_matrix(rng, 3, 4);
  const auto pa = a.predict(u, p);
  const auto pa2 = a.predict(u, p);
  const auto pb = b.predict(u, p);
  CHECK(pa == pa2);   // deterministic
  CHECK(pa == pb);    // dropout inactive in eval mode
}

// End-to-end gradients on the 5-user/6-item toy: every parameter tensor
// against central finite differences, dropout off, batch statistics frozen.
TEST_CASE("end-to-end loss gradients match finite differences") {
  const Toy toy;
  TrainConfig cfg = toy.config();
  cfg.l2 = 0.003;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, cfg);

  std::vector<int> users, prefs;
  std::vector<double> targets;
  const PrefGraph& g = toy.graph;
  for (int u = 0; u < g.n_users; ++u)
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
      users.push_back(u);
      prefs.push_back(g.edge_pref[e]);
      targets.push_back(g.edge_weight[e]);
    }

  model.loss_on_edges(users, prefs, targets, false, true);
  auto grads_of = [&](Parameter& p) { return p.grad; };
  for (Parameter* p : model.params().all()) {
    const Matrix ad = grads_of(*p);
    const Matrix fd = oracles::finite_diff(
        *p, [&] { return model.loss_on_edges(users, prefs, targets, false, false); });
    const double gap = oracles::relative_gap(ad, fd, 1e-8);
    INFO(p->name);
    CHECK(gap < 1e-3);
  }
}

TEST_CASE("zero training epochs keep the initial parameters") {
  const Toy toy;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config(11));
  PgrecModel untouched(toy.graph, toy.user_sim, toy.item_sim, toy.fac, toy.config(11));
  const TrainResult r = model.train();
  CHECK(r.history.empty());
  const auto a = model.params().all();
  const auto b = untouched.params().all();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value.v == b[i]->value.v);
}

TEST_CASE("toy training overfits to rmse below 0.05") {
  const Toy toy;
  TrainConfig cfg = toy.config(21);
  cfg.epochs = 200;
  cfg.lr = 0.02;
  cfg.l2 = 0.0;
  cfg.batch_edges = 256;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, cfg);
  const TrainResult r = model.train();
  REQUIRE(r.history.size() <= 200);
  REQUIRE(!r.history.empty());
  double best = 1e9;
  for (const EpochLog& log : r.history) best = std::min(best, log.train_rmse);
  CHECK(best < 0.05);
}

TEST_CASE("training is deterministic given config and seed") {
  const Toy toy;
  TrainConfig cfg = toy.config(31);
  cfg.epochs = 6;
  cfg.pretrain = true;
  cfg.folds = 3;
  cfg.dropout_mid = 0.3;
  cfg.dropout_last = 0.5;
  auto run = [&] {
    PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, cfg);
    model.train();
    std::vector<double> flat;
    for (Parameter* p : model.params().all())
      flat.insert(flat.end(), p->value.v.begin(), p->value.v.end());
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("diverging loss is reported with the epoch") {
  const Toy toy;
  TrainConfig cfg = toy.config(41);
  cfg.epochs = 50;
  cfg.lr = 1e6;  // guaranteed blow-up
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, cfg);
  try {
    model.train();
    WARN("training survived an absurd learning rate");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact and guarded") {
  const Toy toy;
  TrainConfig cfg = toy.config(51);
  cfg.epochs = 3;
  PgrecModel model(toy.graph, toy.user_sim, toy.item_sim, toy.fac, cfg);
  model.train();

  Checkpoint ckpt;
  ckpt.config_hash = 0xFEEDULL;
  ckpt.seed = 51;
  ckpt.params = model.params();
  AdamState adam;
  adam.init(model.params().all());
  adam.step = 42;
  ckpt.adam = adam;

  const std::string path = std::string(std::filesystem::temp_directory_path()) + "/pgrec_test.ckpt";
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path, 0xFEEDULL);
  CHECK(back.seed == 51);
  const auto a = ckpt.params.all();
  const auto b = back.params.all();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value.v == b[i]->value.v);  // bitwise
  }
  CHECK(back.params.bn1.running_mean.v == ckpt.params.bn1.running_mean.v);
  REQUIRE(back.adam.has_value());
  CHECK(back.adam->step == 42);

  CHECK_THROWS_AS(load_checkpoint(path, 0xBADULL), Error);

  // Truncation is a corruption error.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}
