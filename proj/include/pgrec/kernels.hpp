#pragma once

// Data-parallel inner loops behind the numeric stack. Every kernel has a
// scalar reference implementation and (on x86-64) an AVX2+FMA variant; the
// active variant is chosen once at startup from CPUID and can be overridden
// with force_backend() or the PGREC_KERNELS environment variable
// ("scalar" | "avx2"). Reductions may differ between backends by floating
// point reassociation; equivalence tests bound that difference.
//
// All dense buffers are row-major double.

#include <cstddef>

namespace pgrec::kernels {

enum class Backend { kScalar, kAvx2 };

Backend active_backend();
const char* backend_name(Backend b);
bool cpu_has_avx2();

// Throws pgrec::Error if the requested backend is unsupported on this CPU.
void force_backend(Backend b);

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);
// c[k x n] += a^T * b   with a stored [m x k], b stored [m x n]
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);
// c[m x k] += a * b^T   with a stored [m x n], b stored [k x n]
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k);

// y[rows x xcols] += csr * x, csr given by (row_ptr, col, val)
void csr_matmul(const int* row_ptr, const int* col, const double* val, int rows,
                const double* x, int xcols, double* y);

void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
// dx += g where x > 0
void relu_backward(const double* x, const double* g, double* dx, std::size_t n);
void clamp(const double* x, double lo, double hi, double* y, std::size_t n);

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_squares(const double* x, std::size_t n);

// One fused Adam step over a tensor. bc1 = 1 - beta1^t, bc2 = 1 - beta2^t.
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);

// Reference and vector implementations, exposed for equivalence tests.
namespace scalar {
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k);
void csr_matmul(const int* row_ptr, const int* col, const double* val, int rows,
                const double* x, int xcols, double* y);
void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_backward(const double* x, const double* g, double* dx, std::size_t n);
void clamp(const double* x, double lo, double hi, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_squares(const double* x, std::size_t n);
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define PGREC_HAVE_AVX2_BUILD 1
namespace avx2 {
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k);
void csr_matmul(const int* row_ptr, const int* col, const double* val, int rows,
                const double* x, int xcols, double* y);
void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_backward(const double* x, const double* g, double* dx, std::size_t n);
void clamp(const double* x, double lo, double hi, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_squares(const double* x, std::size_t n);
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
}  // namespace avx2
#endif

}  // namespace pgrec::kernels
