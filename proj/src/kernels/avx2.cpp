// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "radwatch/kernels.hpp"

namespace radwatch::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// Lane mask with the first r (0..3) lanes active.
inline __m256i tail_mask(std::size_t r) {
  alignas(32) static const std::int64_t table[8] = {-1, -1, -1, 0, 0, 0, 0, 0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 3 - r));
}

double squared_distance(const double* a, const double* b, std::size_t d) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= d; j += 4) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j));
    acc = _mm256_fmadd_pd(diff, diff, acc);
  }
  if (j < d) {
    const __m256i m = tail_mask(d - j);
    const __m256d diff =
        _mm256_sub_pd(_mm256_maskload_pd(a + j, m), _mm256_maskload_pd(b + j, m));
    acc = _mm256_fmadd_pd(diff, diff, acc);
  }
  return hsum(acc);
}

inline __m256d load_part(const double* p, std::size_t count, __m256i mask) {
  return count == 4 ? _mm256_loadu_pd(p) : _mm256_maskload_pd(p, mask);
}

void squared_distances(const double* x, const double* rows, std::size_t n,
                       std::size_t d, double* out) {
  if (d == 0 || d > 8) {
    for (std::size_t i = 0; i < n; ++i) out[i] = squared_distance(x, rows + i * d, d);
    return;
  }
  // Feature vectors here are short (7 or 8 wide): keep the query in two
  // registers and stream the rows past it.
  const std::size_t c0 = d < 4 ? d : 4;
  const std::size_t c1 = d > 4 ? d - 4 : 0;
  const __m256i m0 = tail_mask(c0 % 4);
  const __m256i m1 = tail_mask(c1 % 4);
  const __m256d x0 = load_part(x, c0, m0);
  const __m256d x1 = c1 > 0 ? load_part(x + 4, c1, m1) : _mm256_setzero_pd();
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = rows + i * d;
    __m256d diff = _mm256_sub_pd(x0, load_part(r, c0, m0));
    __m256d acc = _mm256_mul_pd(diff, diff);
    if (c1 > 0) {
      diff = _mm256_sub_pd(x1, load_part(r + 4, c1, m1));
      acc = _mm256_fmadd_pd(diff, diff, acc);
    }
    out[i] = hsum(acc);
  }
}

void rbf_row(const double* x, const double* rows, std::size_t n, std::size_t d,
             double gamma, double* out) {
  squared_distances(x, rows, n, d, out);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(-gamma * out[i]);
}

void axpy2(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(out + i);
    acc = _mm256_add_pd(acc, _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                                           _mm256_mul_pd(vb, _mm256_loadu_pd(y + i))));
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) out[i] += a * x[i] + b * y[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{Isa::Avx2, "avx2", squared_distance,
                             squared_distances, rbf_row, axpy2, dot};
  return t;
}

}  // namespace radwatch::simd::avx2
