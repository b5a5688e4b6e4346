#include "pgrec/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pgrec/error.hpp"
#include "pgrec/kernels.hpp"
#include "pgrec/rng.hpp"

namespace pgrec {

namespace {

// Eigenvalues of tridiagonal T strictly below x (Sturm sequence count).
int sturm_count(const std::vector<double>& a, const std::vector<double>& b, double x) {
  int count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double off = i == 0 ? 0.0 : b[i - 1] * b[i - 1];
    d = a[i] - x - off / d;
    if (std::fabs(d) < 1e-300) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

double tridiag_smallest_eigenvalue(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = a[0], hi = a[0];
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = (i > 0 ? std::fabs(b[i - 1]) : 0.0) + (i < b.size() ? std::fabs(b[i]) : 0.0);
    lo = std::min(lo, a[i] - r);
    hi = std::max(hi, a[i] + r);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo) + std::fabs(hi));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(a, b, mid) >= 1) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

// Eigenvector of tridiagonal T for an eigenvalue estimate, by inverse
// iteration with partially pivoted band LU (diag p, superdiagonals q and r;
// r holds the fill created by row swaps).
std::vector<double> tridiag_eigenvector(const std::vector<double>& a, const std::vector<double>& b,
                                        double lambda) {
  const int m = static_cast<int>(a.size());
  if (m == 1) return {1.0};
  double shift = lambda;
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<double> p(m), q(m, 0.0), r(m, 0.0), l(m, 0.0);
    std::vector<char> swapped(m, 0);
    for (int i = 0; i < m; ++i) p[i] = a[i] - shift;
    for (int i = 0; i + 1 < m; ++i) q[i] = b[i];
    bool singular = false;
    for (int i = 0; i + 1 < m; ++i) {
      double s = b[i];  // subdiagonal of row i+1, untouched by earlier steps
      if (std::fabs(s) > std::fabs(p[i])) {
        swapped[i] = 1;
        std::swap(p[i], s);
        std::swap(q[i], p[i + 1]);
        std::swap(r[i], q[i + 1]);
      }
      if (std::fabs(p[i]) < 1e-300) {
        singular = true;
        break;
      }
      const double factor = s / p[i];
      l[i] = factor;
      p[i + 1] -= factor * q[i];
      q[i + 1] -= factor * r[i];
    }
    if (!singular && std::fabs(p[m - 1]) < 1e-300) singular = true;
    if (singular) {
      shift = lambda + (attempt + 1) * 1e-11 * std::max(1.0, std::fabs(lambda));
      continue;
    }
    std::vector<double> x(m);
    for (int i = 0; i < m; ++i) x[i] = (i % 2 == 0) ? 1.0 : -1.0;
    for (int sweep = 0; sweep < 3; ++sweep) {
      for (int i = 0; i + 1 < m; ++i) {
        if (swapped[i]) std::swap(x[i], x[i + 1]);
        x[i + 1] -= l[i] * x[i];
      }
      for (int i = m - 1; i >= 0; --i) {
        double s = x[i];
        if (i + 1 < m) s -= q[i] * x[i + 1];
        if (i + 2 < m) s -= r[i] * x[i + 2];
        x[i] = s / p[i];
      }
      double norm = std::sqrt(kernels::sum_squares(x.data(), x.size()));
      if (norm < 1e-300) norm = 1.0;
      for (double& xi : x) xi /= norm;
    }
    return x;
  }
  throw Error("fiedler_vector: inverse iteration failed on the tridiagonal system");
}

}  // namespace

SparseCsr laplacian_from_weights(const SparseCsr& weights) {
  require(weights.rows == weights.cols, "laplacian_from_weights: matrix not square");
  std::vector<Triplet> tri;
  std::vector<double> deg(weights.rows, 0.0);
  for (int r = 0; r < weights.rows; ++r)
    for (int e = weights.row_ptr[r]; e < weights.row_ptr[r + 1]; ++e) {
      require(weights.col[e] != r, "laplacian_from_weights: self edge present");
      deg[r] += weights.val[e];
      tri.push_back({r, weights.col[e], -weights.val[e]});
    }
  for (int r = 0; r < weights.rows; ++r) tri.push_back({r, r, deg[r]});
  return SparseCsr::from_triplets(weights.rows, weights.cols, tri);
}

FiedlerResult fiedler_vector(const SparseCsr& laplacian, double tol, int max_iters) {
  const int n = laplacian.rows;
  require(laplacian.cols == n, "fiedler_vector: matrix not square");
  require(n >= 2, "fiedler_vector: need at least two nodes");
  require(laplacian.is_symmetric(1e-10), "fiedler_vector: input not symmetric");

  const int cap = max_iters > 0 ? max_iters : std::min(n - 1, 400);

  auto project_constant = [&](std::vector<double>& x) {
    const double mean = kernels::sum(x.data(), x.size()) / n;
    for (double& xi : x) xi -= mean;
  };
  auto norm_of = [](const std::vector<double>& x) {
    return std::sqrt(kernels::sum_squares(x.data(), x.size()));
  };
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    kernels::csr_matmul(laplacian.row_ptr.data(), laplacian.col.data(), laplacian.val.data(), n,
                        x.data(), 1, y.data());
  };

  Rng rng(0x5eed5eedULL);  // fixed internal seed; the solver is deterministic
  std::vector<std::vector<double>> basis;
  std::vector<double> alphas, betas;

  std::vector<double> q(n);
  for (double& x : q) x = rng.uniform(-1.0, 1.0);
  project_constant(q);
  double qn = norm_of(q);
  require(qn > 1e-12, "fiedler_vector: degenerate start vector");
  for (double& x : q) x /= qn;

  std::vector<double> w(n);
  double last_residual = 0.0;

  for (int step = 0; step < cap; ++step) {
    basis.push_back(q);
    apply(q, w);
    const double alpha = kernels::dot(w.data(), q.data(), n);
    alphas.push_back(alpha);
    // Full reorthogonalization against the basis and the constant vector.
    for (int pass = 0; pass < 2; ++pass) {
      project_constant(w);
      for (const auto& b : basis) {
        const double c = kernels::dot(w.data(), b.data(), n);
        kernels::axpy(-c, b.data(), w.data(), n);
      }
    }
    const double beta = norm_of(w);

    const int m = static_cast<int>(alphas.size());
    const double lambda = tridiag_smallest_eigenvalue(alphas, betas);
    std::vector<double> s = tridiag_eigenvector(alphas, betas, lambda);
    const double bound = beta * std::fabs(s[m - 1]);
    const bool space_exhausted = m >= n - 1;

    if (bound <= 0.5 * tol || beta < 1e-12 || space_exhausted || step == cap - 1) {
      std::vector<double> v(n, 0.0);
      for (int i = 0; i < m; ++i) kernels::axpy(s[i], basis[i].data(), v.data(), n);
      project_constant(v);
      const double vn = norm_of(v);
      if (vn > 1e-12) {
        for (double& x : v) x /= vn;
        std::vector<double> lv(n);
        apply(v, lv);
        const double lam = kernels::dot(lv.data(), v.data(), n);
        kernels::axpy(-lam, v.data(), lv.data(), n);
        last_residual = norm_of(lv);
        if (last_residual <= tol ||
            (space_exhausted && last_residual <= std::max(tol, 1e-8))) {
          FiedlerResult out;
          out.lambda2 = lam;
          out.vector = std::move(v);
          out.iterations = m;
          return out;
        }
      }
      if (space_exhausted) break;
    }

    if (beta < 1e-12) {
      // Invariant subspace hit before convergence: restart with a fresh
      // direction orthogonal to everything found so far.
      for (double& x : w) x = rng.uniform(-1.0, 1.0);
      project_constant(w);
      for (const auto& b : basis) {
        const double c = kernels::dot(w.data(), b.data(), n);
        kernels::axpy(-c, b.data(), w.data(), n);
      }
      const double wn = norm_of(w);
      if (wn < 1e-12) break;  // nothing orthogonal left
      for (double& x : w) x /= wn;
      betas.push_back(0.0);
      q = w;
      continue;
    }

    betas.push_back(beta);
    for (int i = 0; i < n; ++i) q[i] = w[i] / beta;
  }

  std::ostringstream msg;
  msg << "fiedler_vector: no convergence after " << alphas.size()
      << " iterations; residual " << last_residual << " (tol " << tol << ")";
  throw Error(msg.str());
}

}  // namespace pgrec
