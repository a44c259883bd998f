#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "radwatch/detectors.hpp"
#include "radwatch/error.hpp"
#include "radwatch/kernels.hpp"

namespace radwatch {

PointSet PointSet::from(const FeatureMatrix& m) {
  PointSet p;
  p.dim = m.cols();
  p.values.assign(m.data(), m.data() + m.rows() * m.cols());
  return p;
}

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "rbf_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw Error(ErrorCode::BadHyperparameter, "rbf_kernel: gamma must be positive");
  return std::exp(-gamma * simd::squared_distance(x, y));
}

namespace {

// LRU cache of Gram matrix columns. Q is symmetric, so column i is also row i.
class KernelCache {
 public:
  KernelCache(const FeatureMatrix& data, double gamma, KernelKind kind, std::size_t budget_mb)
      : data_(data), gamma_(gamma), kind_(kind), n_(data.rows()) {
    const std::size_t row_bytes = std::max<std::size_t>(n_, 1) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, budget_mb * 1024 * 1024 / row_bytes);
    capacity_ = std::min(capacity_, n_);
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      diag_[i] = kind_ == KernelKind::Rbf ? 1.0 : simd::dot(data.row(i), data.row(i));
  }

  // Valid until the next two get() calls evict it; callers hold at most two.
  const double* get(std::size_t i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->values.data();
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().row);
      lru_.splice(lru_.begin(), lru_, std::prev(lru_.end()));
    } else {
      lru_.emplace_front();
      lru_.front().values.resize(n_);
    }
    Entry& e = lru_.front();
    e.row = i;
    compute(i, e.values.data());
    index_[i] = lru_.begin();
    return e.values.data();
  }

  double diag(std::size_t i) const { return diag_[i]; }

 private:
  struct Entry {
    std::size_t row = 0;
    std::vector<double> values;
  };

  void compute(std::size_t i, double* out) const {
    const auto& k = simd::active_kernels();
    const std::size_t d = data_.cols();
    if (kind_ == KernelKind::Rbf) {
      k.rbf_row(data_.data() + i * d, data_.data(), n_, d, gamma_, out);
    } else {
      for (std::size_t t = 0; t < n_; ++t) out[t] = k.dot(data_.data() + i * d, data_.data() + t * d, d);
    }
  }

  const FeatureMatrix& data_;
  double gamma_;
  KernelKind kind_;
  std::size_t n_;
  std::size_t capacity_ = 2;
  std::vector<double> diag_;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

bool has_two_distinct_rows(const FeatureMatrix& data) {
  for (std::size_t i = 1; i < data.rows(); ++i) {
    const auto a = data.row(0);
    const auto b = data.row(i);
    if (!std::equal(a.begin(), a.end(), b.begin())) return true;
  }
  return false;
}

void check_finite(const FeatureMatrix& data) {
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (double v : data.row(i))
      if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateData, "training data contains non-finite values");
}

}  // namespace

OcsvmDualSolution solve_ocsvm_dual(const FeatureMatrix& data, double nu, double gamma,
                                   double tol, std::size_t max_iter, KernelKind kernel,
                                   std::size_t cache_mb) {
  const std::size_t l = data.rows();
  if (l < 2) throw Error(ErrorCode::DegenerateData, "one-class SVM needs at least 2 rows");
  if (!(nu > 0.0 && nu <= 1.0)) throw Error(ErrorCode::BadHyperparameter, "nu must lie in (0, 1]");
  if (kernel == KernelKind::Rbf && !(gamma > 0.0 && std::isfinite(gamma)))
    throw Error(ErrorCode::BadHyperparameter, "gamma must be positive");
  if (!(tol > 0.0)) throw Error(ErrorCode::BadHyperparameter, "tol must be positive");

  OcsvmDualSolution sol;
  const double upper = 1.0 / (nu * static_cast<double>(l));
  sol.upper_bound = upper;
  sol.alphas.assign(l, 0.0);

  // Feasible start: the first floor(nu l) points at the bound, the remainder
  // of the unit mass on the next point.
  const auto full = static_cast<std::size_t>(std::floor(nu * static_cast<double>(l)));
  double placed = 0.0;
  for (std::size_t i = 0; i < std::min(full, l); ++i) {
    sol.alphas[i] = upper;
    placed += upper;
  }
  if (full < l) sol.alphas[full] = std::max(0.0, 1.0 - placed);

  KernelCache cache(data, gamma, kernel, cache_mb);
  const auto& kern = simd::active_kernels();

  sol.gradient.assign(l, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    if (sol.alphas[i] == 0.0) continue;
    const double* q = cache.get(i);
    kern.axpy2(sol.alphas[i], q, 0.0, q, sol.gradient.data(), l);
  }

  auto& alpha = sol.alphas;
  auto& grad = sol.gradient;
  std::size_t iter = 0;
  double gap = 0.0;
  while (true) {
    // Most violating pair: mass moves from j (largest gradient among a > 0)
    // to i (smallest gradient among a < upper).
    std::size_t i = l, j = l;
    double gmin = std::numeric_limits<double>::infinity();
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < l; ++t) {
      if (alpha[t] < upper && grad[t] < gmin) {
        gmin = grad[t];
        i = t;
      }
      if (alpha[t] > 0.0 && grad[t] > gmax) {
        gmax = grad[t];
        j = t;
      }
    }
    gap = (i == l || j == l) ? 0.0 : gmax - gmin;
    if (gap < tol) {
      sol.converged = true;
      break;
    }
    if (iter >= max_iter) break;
    ++iter;

    const double* qi = cache.get(i);
    const double* qj = cache.get(j);
    double curvature = cache.diag(i) + cache.diag(j) - 2.0 * qi[j];
    if (curvature <= 0.0) curvature = 1e-12;
    double delta = (grad[j] - grad[i]) / curvature;
    const double room_i = upper - alpha[i];
    const double room_j = alpha[j];
    if (delta >= room_i) {
      delta = room_i;
    }
    if (delta >= room_j) {
      delta = room_j;
    }
    if (delta == room_i) alpha[i] = upper;
    else alpha[i] += delta;
    if (delta == room_j) alpha[j] = 0.0;
    else alpha[j] -= delta;
    kern.axpy2(delta, qi, -delta, qj, grad.data(), l);
  }
  sol.iterations = iter;
  sol.kkt_gap = gap;

  // Offset from free points; bracket midpoint when none are free.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < l; ++t) {
    if (alpha[t] >= upper) lb = std::max(lb, grad[t]);
    else if (alpha[t] <= 0.0) ub = std::min(ub, grad[t]);
    else {
      free_sum += grad[t];
      ++free_count;
    }
  }
  if (free_count > 0) sol.rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(lb) && std::isfinite(ub)) sol.rho = 0.5 * (lb + ub);
  else sol.rho = std::isfinite(lb) ? lb : ub;

  double obj = 0.0;
  for (std::size_t t = 0; t < l; ++t) obj += alpha[t] * grad[t];
  sol.objective = 0.5 * obj;
  return sol;
}

double resolve_gamma(const FeatureMatrix& data, const OcsvmParams& params) {
  if (params.gamma) {
    if (!(*params.gamma > 0.0)) throw Error(ErrorCode::BadHyperparameter, "gamma must be positive");
    return *params.gamma;
  }
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (params.gamma_rule == GammaRule::Scale) {
    double sum = 0.0;
    double sq = 0.0;
    const double count = static_cast<double>(n * d);
    for (std::size_t i = 0; i < n * d; ++i) sum += data.data()[i];
    const double mean = sum / count;
    for (std::size_t i = 0; i < n * d; ++i) {
      const double diff = data.data()[i] - mean;
      sq += diff * diff;
    }
    const double var = sq / count;
    return var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }
  // Median heuristic over an evenly strided sample of at most 1000 rows.
  const std::size_t stride = std::max<std::size_t>(1, n / 1000);
  std::vector<double> dists;
  for (std::size_t a = 0; a < n; a += stride)
    for (std::size_t b = a + stride; b < n; b += stride)
      dists.push_back(simd::squared_distance(data.row(a), data.row(b)));
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? 1.0 / *mid : 1.0;
}

OcsvmModel train_ocsvm(const FeatureMatrix& data, const OcsvmParams& params) {
  if (data.rows() < 2) throw Error(ErrorCode::DegenerateData, "one-class SVM needs at least 2 rows");
  check_finite(data);
  if (!has_two_distinct_rows(data))
    throw Error(ErrorCode::DegenerateData, "one-class SVM needs at least 2 distinct rows");
  if (params.max_iter == 0) throw Error(ErrorCode::BadHyperparameter, "max_iter must be positive");

  const double gamma = resolve_gamma(data, params);
  const auto sol = solve_ocsvm_dual(data, params.nu, gamma, params.tol, params.max_iter,
                                    KernelKind::Rbf, params.cache_mb);
  OcsvmModel model;
  model.support_vectors.dim = data.cols();
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (sol.alphas[i] <= 0.0) continue;
    const auto r = data.row(i);
    model.support_vectors.values.insert(model.support_vectors.values.end(), r.begin(), r.end());
    model.alphas.push_back(sol.alphas[i]);
  }
  model.offset = sol.rho;
  model.gamma = gamma;
  model.nu = params.nu;
  model.train_size = data.rows();
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  model.objective = sol.objective;
  model.tol = params.tol;
  model.max_iter = params.max_iter;
  return model;
}

double ocsvm_decision(const OcsvmModel& model, std::span<const double> x) {
  const std::size_t d = model.support_vectors.dim;
  if (x.size() != d) throw Error(ErrorCode::DimensionMismatch, "ocsvm_decision: dimension mismatch");
  const std::size_t m = model.alphas.size();
  std::vector<double> k(m);
  simd::active_kernels().rbf_row(x.data(), model.support_vectors.values.data(), m, d,
                                 model.gamma, k.data());
  return simd::active_kernels().dot(model.alphas.data(), k.data(), m) - model.offset;
}

}  // namespace radwatch
