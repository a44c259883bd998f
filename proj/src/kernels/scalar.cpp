#include <cmath>

#include "radwatch/kernels.hpp"

namespace radwatch::simd {
namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

void squared_distances(const double* x, const double* rows, std::size_t n,
                       std::size_t d, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = squared_distance(x, rows + i * d, d);
}

void rbf_row(const double* x, const double* rows, std::size_t n, std::size_t d,
             double gamma, double* out) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::exp(-gamma * squared_distance(x, rows + i * d, d));
}

void axpy2(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a * x[i] + b * y[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, "scalar", squared_distance,
                                 squared_distances, rbf_row, axpy2, dot};
  return table;
}

}  // namespace radwatch::simd
