#pragma once

// Data-parallel inner loops shared by the detectors. Each instruction set
// provides one KernelTable; the scalar table is the reference and every other
// table is tested against it for equivalence.

#include <cstddef>
#include <span>

namespace radwatch::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  // ||a - b||^2 over d entries.
  double (*squared_distance)(const double* a, const double* b, std::size_t d);
  // out[i] = ||x - rows[i]||^2 for a row-major n x d block.
  void (*squared_distances)(const double* x, const double* rows, std::size_t n,
                            std::size_t d, double* out);
  // out[i] = exp(-gamma * ||x - rows[i]||^2).
  void (*rbf_row)(const double* x, const double* rows, std::size_t n,
                  std::size_t d, double gamma, double* out);
  // out[i] += a * x[i] + b * y[i].
  void (*axpy2)(double a, const double* x, double b, const double* y,
                double* out, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the binary was built without AVX2 support or the running CPU
// lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Best table for this CPU. RADWATCH_ISA=scalar forces the reference path.
const KernelTable& active_kernels();

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  return active_kernels().squared_distance(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

}  // namespace radwatch::simd
