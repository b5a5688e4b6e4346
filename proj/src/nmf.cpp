#include "pgrec/nmf.hpp"

#include <algorithm>
#include <cmath>

#include "pgrec/kernels.hpp"
#include "pgrec/rng.hpp"

namespace pgrec {

namespace {

// Observed entries as parallel arrays.
struct Observed {
  std::vector<int> user, item;
  std::vector<double> value;

  explicit Observed(const RatingStore& store) {
    user.reserve(store.count());
    item.reserve(store.count());
    value.reserve(store.count());
    for (const Rating& r : store.ratings) {
      user.push_back(r.user);
      item.push_back(r.item);
      value.push_back(r.value);
    }
  }
};

}  // namespace

double observed_rmse(const Factorization& f, const RatingStore& store) {
  require(!store.ratings.empty(), "observed_rmse: empty store");
  double sse = 0.0;
  for (const Rating& r : store.ratings) {
    double pred = 0.0;
    for (int k = 0; k < f.rank; ++k)
      pred += f.user_factors.at(r.user, k) * f.item_factors.at(k, r.item);
    const double d = pred - r.value;
    sse += d * d;
  }
  return std::sqrt(sse / store.count());
}

Factorization nmf_factorize(const RatingStore& train, const NmfOptions& options,
                            const NmfObserver& observer) {
  require(!train.ratings.empty(), "nmf_factorize: empty train store");
  const int n = train.n_users, m = train.n_items, f = options.rank;
  require(f >= 1, "nmf_factorize: rank must be positive");
  require(f <= std::min(n, m), "nmf_factorize: rank exceeds min(users, items)");

  Factorization fac;
  fac.rank = f;
  fac.user_factors = Matrix(n, f);
  fac.item_factors = Matrix(f, m);
  Rng rng(derive_seed(options.seed, "nmf-init"));
  for (double& x : fac.user_factors.v) x = rng.uniform_pos();
  for (double& x : fac.item_factors.v) x = rng.uniform_pos();

  const Observed obs(train);
  const std::size_t nnz = obs.value.size();
  std::vector<double> pred(nnz);
  Matrix item_t(m, f);  // item factors transposed, for row-contiguous access

  auto refresh_item_t = [&]() {
    for (int k = 0; k < f; ++k)
      for (int i = 0; i < m; ++i) item_t.at(i, k) = fac.item_factors.at(k, i);
  };
  auto predict_observed = [&]() {
    for (std::size_t e = 0; e < nnz; ++e)
      pred[e] = kernels::dot(fac.user_factors.row(obs.user[e]), item_t.row(obs.item[e]), f);
  };
  auto loss = [&]() {
    double sse = 0.0;
    for (std::size_t e = 0; e < nnz; ++e) {
      const double d = pred[e] - obs.value[e];
      sse += d * d;
    }
    return sse;
  };

  refresh_item_t();
  predict_observed();
  double prev_loss = loss();

  Matrix num(n, f), den(n, f);
  Matrix num_i(m, f), den_i(m, f);
  for (int iter = 1; iter <= options.max_iters; ++iter) {
    // user factors: W <- W .* (sum_obs R H^T) / (sum_obs (WH) H^T)
    std::fill(num.v.begin(), num.v.end(), 0.0);
    std::fill(den.v.begin(), den.v.end(), 0.0);
    for (std::size_t e = 0; e < nnz; ++e) {
      const double* hrow = item_t.row(obs.item[e]);
      kernels::axpy(obs.value[e], hrow, num.row(obs.user[e]), f);
      kernels::axpy(pred[e], hrow, den.row(obs.user[e]), f);
    }
    for (std::size_t x = 0; x < fac.user_factors.size(); ++x)
      fac.user_factors.v[x] *= num.v[x] / (den.v[x] + options.denom_eps);
    predict_observed();

    // item factors: H <- H .* (sum_obs W^T R) / (sum_obs W^T (WH))
    std::fill(num_i.v.begin(), num_i.v.end(), 0.0);
    std::fill(den_i.v.begin(), den_i.v.end(), 0.0);
    for (std::size_t e = 0; e < nnz; ++e) {
      const double* wrow = fac.user_factors.row(obs.user[e]);
      kernels::axpy(obs.value[e], wrow, num_i.row(obs.item[e]), f);
      kernels::axpy(pred[e], wrow, den_i.row(obs.item[e]), f);
    }
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < f; ++k)
        item_t.at(i, k) *= num_i.at(i, k) / (den_i.at(i, k) + options.denom_eps);
    for (int k = 0; k < f; ++k)
      for (int i = 0; i < m; ++i) fac.item_factors.at(k, i) = item_t.at(i, k);
    predict_observed();

    const double cur_loss = loss();
    if (observer) observer(iter, cur_loss, fac);
    const double rel = (prev_loss - cur_loss) / std::max(prev_loss, 1e-300);
    prev_loss = cur_loss;
    if (rel >= 0.0 && rel < options.tol) break;
  }
  return fac;
}

}  // namespace pgrec
