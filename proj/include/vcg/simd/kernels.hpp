#pragma once

// Dense inner-loop kernels. Every kernel has a scalar reference implementation
// and, for f32, vectorized AVX2+FMA / NEON variants chosen once at startup.
// The f64 overloads always take the scalar path; f64 exists for gradient checks.
//
// Matrix arguments are row-major and every gemm accumulates into C:
//   gemm_nn: C[m x n] += A[m x k]   * B[k x n]
//   gemm_nt: C[m x n] += A[m x k]   * B[n x k]^T
//   gemm_tn: C[m x n] += A[k x m]^T * B[k x n]

#include <cstddef>
#include <string_view>

namespace vcg::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

/// The variant used by the f32 entry points. Defaults to the best supported
/// ISA; the VCG_SIMD environment variable ("scalar", "avx2", "neon") overrides.
Isa active_isa();

/// Switches the f32 variant. Throws std::invalid_argument if unsupported.
void set_active_isa(Isa isa);

float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

struct KernelTable {
  float (*dot)(const float*, const float*, std::size_t);
  void (*axpy)(float, const float*, float*, std::size_t);
  void (*gemm_nn)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
  void (*gemm_nt)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
  void (*gemm_tn)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
};

/// Direct access to one variant's table, for equivalence tests.
const KernelTable& kernels_for(Isa isa);

namespace scalar {
template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * b[p * n + j];
    }
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      if (av == T(0)) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * b[p * n + j];
    }
}
}  // namespace scalar

}  // namespace vcg::simd
