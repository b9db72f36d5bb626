#include <doctest.h>

#include <cmath>
#include <vector>

#include "vcg/simd/kernels.hpp"
#include "vcg/util/rng.hpp"

using namespace vcg;
using namespace vcg::simd;

namespace {

std::vector<float> random_vec(Rng& r, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(r.normal());
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(b[i])));
}

}  // namespace

TEST_CASE("every supported ISA matches the scalar reference") {
  Rng r(11);
  const auto& ref = kernels_for(Isa::kScalar);
  for (auto isa : {Isa::kAvx2, Isa::kNeon}) {
    if (!isa_supported(isa)) continue;
    CAPTURE(isa_name(isa));
    const auto& k = kernels_for(isa);
    for (std::size_t n : {0u, 1u, 7u, 8u, 15u, 33u, 100u}) {
      const auto a = random_vec(r, n), b = random_vec(r, n);
      CHECK(std::abs(k.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) < 1e-4 * (1 + n));
      auto y1 = b, y2 = b;
      k.axpy(0.7f, a.data(), y1.data(), n);
      ref.axpy(0.7f, a.data(), y2.data(), n);
      check_close(y1, y2, 1e-6);
    }
    for (auto [m, n, kk] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {3, 5, 7}, {9, 17, 13}, {16, 24, 8}, {5, 33, 31}}) {
      const auto a = random_vec(r, m * kk);
      const auto b = random_vec(r, kk * n);
      const auto bt = random_vec(r, n * kk);
      const auto at = random_vec(r, kk * m);
      const auto c0 = random_vec(r, m * n);
      auto c1 = c0, c2 = c0;
      k.gemm_nn(m, n, kk, a.data(), b.data(), c1.data());
      ref.gemm_nn(m, n, kk, a.data(), b.data(), c2.data());
      check_close(c1, c2, 1e-5);
      c1 = c0, c2 = c0;
      k.gemm_nt(m, n, kk, a.data(), bt.data(), c1.data());
      ref.gemm_nt(m, n, kk, a.data(), bt.data(), c2.data());
      check_close(c1, c2, 1e-5);
      c1 = c0, c2 = c0;
      k.gemm_tn(m, n, kk, at.data(), b.data(), c1.data());
      ref.gemm_tn(m, n, kk, at.data(), b.data(), c2.data());
      check_close(c1, c2, 1e-5);
    }
  }
}

TEST_CASE("scalar gemm agrees with a naive triple loop") {
  Rng r(2);
  const std::size_t m = 4, n = 3, k = 5;
  const auto a = random_vec(r, m * k), b = random_vec(r, k * n);
  std::vector<float> c(m * n, 0.0f);
  scalar::gemm_nn(m, n, k, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += double(a[i * k + p]) * b[p * n + j];
      CHECK(std::abs(c[i * n + j] - s) < 1e-5);
    }
}

TEST_CASE("active ISA can be switched and restored") {
  const auto before = active_isa();
  set_active_isa(Isa::kScalar);
  CHECK(active_isa() == Isa::kScalar);
  set_active_isa(before);
  CHECK(active_isa() == before);
  if (!isa_supported(Isa::kNeon)) CHECK_THROWS(kernels_for(Isa::kNeon));
}
