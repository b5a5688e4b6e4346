#include "pgrec/kernels.hpp"

#if defined(PGREC_HAVE_AVX2_BUILD)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

// Compiled with -mavx2 -mfma (see src/CMakeLists.txt). Dispatch guarantees
// these run only on CPUs that report both features.

namespace pgrec::kernels::avx2 {

namespace {

// y[0..n) += a * x[0..n)
inline void fma_row(double a, const double* x, double* y, int n) {
  const __m256d av = _mm256_set1_pd(a);
  int j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    __m256d y1 = _mm256_loadu_pd(y + j + 4);
    y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + j), y0);
    y1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + j + 4), y1);
    _mm256_storeu_pd(y + j, y0);
    _mm256_storeu_pd(y + j + 4, y1);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + j), y0);
    _mm256_storeu_pd(y + j, y0);
  }
  for (; j < n; ++j) y[j] += a * x[j];
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      fma_row(av, b + static_cast<std::size_t>(p) * n, crow, n);
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      fma_row(av, brow, c + static_cast<std::size_t>(p) * n, n);
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * n;
    double* crow = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * n;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      int p = 0;
      for (; p + 8 <= n; p += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p + 4), _mm256_loadu_pd(brow + p + 4), acc1);
      }
      for (; p + 4 <= n; p += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc0);
      double acc = hsum(_mm256_add_pd(acc0, acc1));
      for (; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void csr_matmul(const int* row_ptr, const int* col, const double* val, int rows,
                const double* x, int xcols, double* y) {
  for (int r = 0; r < rows; ++r) {
    double* yrow = y + static_cast<std::size_t>(r) * xcols;
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e)
      fma_row(val[e], x + static_cast<std::size_t>(col[e]) * xcols, yrow, xcols);
  }
}

void add(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] *= alpha;
}

void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gv));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] += g[i];
}

void clamp(const double* x, double lo, double hi, double* y, std::size_t n) {
  const __m256d lov = _mm256_set1_pd(lo);
  const __m256d hiv = _mm256_set1_pd(hi);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_min_pd(hiv, _mm256_max_pd(lov, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] = std::min(hi, std::max(lo, x[i]));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double sum_squares(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d ibc1 = _mm256_set1_pd(1.0 / bc1);
  const __m256d ibc2 = _mm256_set1_pd(1.0 / bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(one_b1, gv));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(one_b2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, ibc1);
    const __m256d vhat = _mm256_mul_pd(vv, ibc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * (1.0 / bc1);
    const double vhat = v[i] * (1.0 / bc2);
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace pgrec::kernels::avx2

#endif  // PGREC_HAVE_AVX2_BUILD
