#include <cmath>
#include <vector>

#include "doctest.h"
#include "radwatch/kernels.hpp"
#include "radwatch/rng.hpp"

using namespace radwatch;
using radwatch::simd::KernelTable;

namespace {

std::vector<double> random_block(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, 3.0);
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar table matches plain loops") {
  const KernelTable& k = simd::scalar_kernels();
  const std::vector<double> a = {1, 2, 3}, b = {4, 6, 3};
  CHECK(k.squared_distance(a.data(), b.data(), 3) == 25.0);
  CHECK(k.dot(a.data(), b.data(), 3) == 25.0);
  double out[1];
  k.rbf_row(a.data(), b.data(), 1, 3, 0.04, out);
  CHECK(out[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("active table honours RADWATCH_ISA=scalar") {
  // Only checks the table is one of the known ones; the env var is read once.
  const KernelTable& k = simd::active_kernels();
  CHECK((k.isa == simd::Isa::Scalar || k.isa == simd::Isa::Avx2));
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const KernelTable* v = simd::avx2_kernels();
  if (!v) {
    MESSAGE("AVX2 not available; skipping");
    return;
  }
  const KernelTable& s = simd::scalar_kernels();
  Rng rng(7);
  for (std::size_t d : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 13u, 16u, 31u}) {
    for (std::size_t n : {0u, 1u, 3u, 17u}) {
      const auto x = random_block(rng, d);
      const auto rows = random_block(rng, n * d);
      std::vector<double> ds(n), dv(n), ks(n), kv(n);
      s.squared_distances(x.data(), rows.data(), n, d, ds.data());
      v->squared_distances(x.data(), rows.data(), n, d, dv.data());
      s.rbf_row(x.data(), rows.data(), n, d, 0.07, ks.data());
      v->rbf_row(x.data(), rows.data(), n, d, 0.07, kv.data());
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(rel_err(dv[i], ds[i]) < 1e-13);
        CHECK(std::abs(kv[i] - ks[i]) < 1e-13);
        CHECK(rel_err(v->squared_distance(x.data(), rows.data() + i * d, d), ds[i]) < 1e-13);
      }
      if (n > 0) CHECK(rel_err(v->dot(x.data(), rows.data(), d), s.dot(x.data(), rows.data(), d)) < 1e-12);
    }
  }
  for (std::size_t n : {0u, 1u, 4u, 5u, 11u, 64u}) {
    const auto x = random_block(rng, n), y = random_block(rng, n);
    auto os = random_block(rng, n);
    auto ov = os;
    s.axpy2(0.3, x.data(), -1.7, y.data(), os.data(), n);
    v->axpy2(0.3, x.data(), -1.7, y.data(), ov.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(os[i] - ov[i]) < 1e-12);
  }
}

TEST_CASE("squared distance of a point to itself is zero on every table") {
  Rng rng(3);
  const auto x = random_block(rng, 11);
  CHECK(simd::scalar_kernels().squared_distance(x.data(), x.data(), 11) == 0.0);
  if (const auto* v = simd::avx2_kernels()) CHECK(v->squared_distance(x.data(), x.data(), 11) == 0.0);
}
