#pragma once

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#define VCG_HAVE_X86 1
#else
#define VCG_HAVE_X86 0
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define VCG_HAVE_NEON 1
#else
#define VCG_HAVE_NEON 0
#endif

namespace vcg::simd {

#if VCG_HAVE_X86
namespace avx2 {
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
}  // namespace avx2
#endif

#if VCG_HAVE_NEON
namespace neon {
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c);
}  // namespace neon
#endif

}  // namespace vcg::simd
