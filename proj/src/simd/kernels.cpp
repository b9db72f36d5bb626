#include "vcg/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace vcg::simd {
namespace {

const KernelTable kScalarTable{
    &scalar::dot<float>,     &scalar::axpy<float>,    &scalar::gemm_nn<float>,
    &scalar::gemm_nt<float>, &scalar::gemm_tn<float>,
};

#if VCG_HAVE_X86
const KernelTable kAvx2Table{&avx2::dot, &avx2::axpy, &avx2::gemm_nn, &avx2::gemm_nt, &avx2::gemm_tn};
#endif

#if VCG_HAVE_NEON
const KernelTable kNeonTable{&neon::dot, &neon::axpy, &neon::gemm_nn, &neon::gemm_nt, &neon::gemm_tn};
#endif

Isa detect_best() {
  if (const char* env = std::getenv("VCG_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
    if (want == "neon" && isa_supported(Isa::kNeon)) return Isa::kNeon;
  }
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(detect_best())};
  return table;
}

std::atomic<Isa>& active_isa_slot() {
  static std::atomic<Isa> isa{detect_best()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#if VCG_HAVE_X86 && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon: return VCG_HAVE_NEON != 0;
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa))
    throw std::invalid_argument("SIMD variant not supported on this CPU: " + std::string(isa_name(isa)));
  switch (isa) {
#if VCG_HAVE_X86
    case Isa::kAvx2: return kAvx2Table;
#endif
#if VCG_HAVE_NEON
    case Isa::kNeon: return kNeonTable;
#endif
    default: return kScalarTable;
  }
}

Isa active_isa() { return active_isa_slot().load(); }

void set_active_isa(Isa isa) {
  active_table().store(&kernels_for(isa));
  active_isa_slot().store(isa);
}

float dot(const float* a, const float* b, std::size_t n) { return active_table().load()->dot(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { active_table().load()->axpy(alpha, x, y, n); }
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  active_table().load()->gemm_nn(m, n, k, a, b, c);
}
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  active_table().load()->gemm_nt(m, n, k, a, b, c);
}
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  active_table().load()->gemm_tn(m, n, k, a, b, c);
}

double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  scalar::gemm_nn(m, n, k, a, b, c);
}
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  scalar::gemm_nt(m, n, k, a, b, c);
}
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  scalar::gemm_tn(m, n, k, a, b, c);
}

}  // namespace vcg::simd
