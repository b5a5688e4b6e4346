#include <cstdlib>
#include <cstring>
#include <mutex>

#include "pgrec/error.hpp"
#include "pgrec/kernels.hpp"

namespace pgrec::kernels {

namespace {

struct Table {
  void (*gemm_nn)(const double*, const double*, double*, int, int, int);
  void (*gemm_tn)(const double*, const double*, double*, int, int, int);
  void (*gemm_nt)(const double*, const double*, double*, int, int, int);
  void (*csr_matmul)(const int*, const int*, const double*, int, const double*, int, double*);
  void (*add)(const double*, const double*, double*, std::size_t);
  void (*sub)(const double*, const double*, double*, std::size_t);
  void (*mul)(const double*, const double*, double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*relu)(const double*, double*, std::size_t);
  void (*relu_backward)(const double*, const double*, double*, std::size_t);
  void (*clamp)(const double*, double, double, double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sum_squares)(const double*, std::size_t);
  void (*adam_update)(double*, const double*, double*, double*, std::size_t, double, double,
                      double, double, double, double);
};

constexpr Table kScalarTable = {
    scalar::gemm_nn, scalar::gemm_tn, scalar::gemm_nt, scalar::csr_matmul,
    scalar::add,     scalar::sub,     scalar::mul,     scalar::axpy,
    scalar::scale,   scalar::relu,    scalar::relu_backward, scalar::clamp,
    scalar::dot,     scalar::sum,     scalar::sum_squares,   scalar::adam_update,
};

#if defined(PGREC_HAVE_AVX2_BUILD)
constexpr Table kAvx2Table = {
    avx2::gemm_nn, avx2::gemm_tn, avx2::gemm_nt, avx2::csr_matmul,
    avx2::add,     avx2::sub,     avx2::mul,     avx2::axpy,
    avx2::scale,   avx2::relu,    avx2::relu_backward, avx2::clamp,
    avx2::dot,     avx2::sum,     avx2::sum_squares,   avx2::adam_update,
};
#endif

const Table* g_table = nullptr;
Backend g_backend = Backend::kScalar;
std::once_flag g_init;

void init_dispatch() {
  Backend want = cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
  if (const char* env = std::getenv("PGREC_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) want = Backend::kScalar;
    else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) want = Backend::kAvx2;
  }
  g_backend = want;
#if defined(PGREC_HAVE_AVX2_BUILD)
  g_table = (want == Backend::kAvx2) ? &kAvx2Table : &kScalarTable;
#else
  g_table = &kScalarTable;
#endif
}

inline const Table& table() {
  std::call_once(g_init, init_dispatch);
  return *g_table;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(PGREC_HAVE_AVX2_BUILD)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  table();
  return g_backend;
}

const char* backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
  table();
  if (b == Backend::kAvx2) {
    require(cpu_has_avx2(), "kernels: AVX2 backend not supported on this CPU");
#if defined(PGREC_HAVE_AVX2_BUILD)
    g_table = &kAvx2Table;
#endif
  } else {
    g_table = &kScalarTable;
  }
  g_backend = b;
}

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  table().gemm_nn(a, b, c, m, k, n);
}
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  table().gemm_tn(a, b, c, m, k, n);
}
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  table().gemm_nt(a, b, c, m, n, k);
}
void csr_matmul(const int* row_ptr, const int* col, const double* val, int rows,
                const double* x, int xcols, double* y) {
  table().csr_matmul(row_ptr, col, val, rows, x, xcols, y);
}
void add(const double* a, const double* b, double* y, std::size_t n) { table().add(a, b, y, n); }
void sub(const double* a, const double* b, double* y, std::size_t n) { table().sub(a, b, y, n); }
void mul(const double* a, const double* b, double* y, std::size_t n) { table().mul(a, b, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { table().axpy(alpha, x, y, n); }
void scale(double alpha, double* y, std::size_t n) { table().scale(alpha, y, n); }
void relu(const double* x, double* y, std::size_t n) { table().relu(x, y, n); }
void relu_backward(const double* x, const double* g, double* dx, std::size_t n) {
  table().relu_backward(x, g, dx, n);
}
void clamp(const double* x, double lo, double hi, double* y, std::size_t n) {
  table().clamp(x, lo, hi, y, n);
}
double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
double sum(const double* x, std::size_t n) { return table().sum(x, n); }
double sum_squares(const double* x, std::size_t n) { return table().sum_squares(x, n); }
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2) {
  table().adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace pgrec::kernels
