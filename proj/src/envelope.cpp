#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "radwatch/detectors.hpp"
#include "radwatch/error.hpp"
#include "radwatch/rng.hpp"

namespace radwatch {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(std::span<const double> v, std::size_t d) {
  return {v.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)};
}

double ridge_for(std::span<const double> cov, std::size_t d) {
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov[j * d + j];
  return 1e-9 * trace / static_cast<double>(d);
}

// Inverse of an SPD matrix through its Cholesky factor; empty on failure.
std::optional<RowMatrix> spd_inverse(const RowMatrix& m) {
  Eigen::LLT<RowMatrix> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  RowMatrix inv = llt.solve(RowMatrix::Identity(m.rows(), m.cols()));
  if (!inv.allFinite()) return std::nullopt;
  return RowMatrix(0.5 * (inv + inv.transpose()));
}

// Mahalanobis machinery for C-steps: always ridge-regularized.
struct Metric {
  std::vector<double> mu;
  RowMatrix inv;
};

std::optional<Metric> metric_for(const FeatureMatrix& data, std::span<const std::size_t> subset) {
  const std::size_t d = data.cols();
  Metric m;
  std::vector<double> cov;
  subset_moments(data, subset, m.mu, cov);
  RowMatrix c = as_matrix(cov, d);
  const double eps = ridge_for(cov, d);
  if (!(eps > 0.0)) return std::nullopt;
  c.diagonal().array() += eps;
  auto inv = spd_inverse(c);
  if (!inv) return std::nullopt;
  m.inv = std::move(*inv);
  return m;
}

double quad_form(const RowMatrix& inv, std::span<const double> mu, std::span<const double> x,
                 std::vector<double>& scratch) {
  const std::size_t d = mu.size();
  scratch.resize(d);
  for (std::size_t j = 0; j < d; ++j) scratch[j] = x[j] - mu[j];
  double acc = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < d; ++b) row += inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * scratch[b];
    acc += scratch[a] * row;
  }
  return std::max(acc, 0.0);
}

std::vector<std::size_t> closest(const FeatureMatrix& data, const Metric& metric, std::size_t h) {
  const std::size_t n = data.rows();
  std::vector<double> dist(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) dist[i] = quad_form(metric.inv, metric.mu, data.row(i), scratch);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                    });
  order.resize(h);
  std::sort(order.begin(), order.end());
  return order;
}

double subset_det(const FeatureMatrix& data, std::span<const std::size_t> subset) {
  std::vector<double> mu, cov;
  subset_moments(data, subset, mu, cov);
  return determinant(cov, data.cols());
}

// Binomial coefficient, saturating at limit + 1.
std::size_t choose_capped(std::size_t n, std::size_t k, std::size_t limit) {
  k = std::min(k, n - k);
  long double acc = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (acc > static_cast<long double>(limit)) return limit + 1;
  }
  return static_cast<std::size_t>(std::llround(acc));
}

struct Candidate {
  double det;
  std::vector<std::size_t> subset;
};

// Repeated C-steps until the determinant stops decreasing.
Candidate concentrate(const FeatureMatrix& data, std::vector<std::size_t> subset, std::size_t h,
                      std::size_t max_steps) {
  double det = subset_det(data, subset);
  for (std::size_t s = 0; s < max_steps; ++s) {
    auto next = mcd_cstep(data, subset, h);
    if (next == subset) break;
    const double next_det = subset_det(data, next);
    if (!(next_det < det)) break;
    subset = std::move(next);
    det = next_det;
  }
  return {det, std::move(subset)};
}

}  // namespace

std::size_t mcd_min_h(std::size_t n, std::size_t d) { return (n + d + 1) / 2; }

std::size_t mcd_default_h(std::size_t n, std::size_t d) {
  const auto h = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(n)));
  return std::min(n, std::max(h, mcd_min_h(n, d)));
}

void subset_moments(const FeatureMatrix& data, std::span<const std::size_t> subset,
                    std::vector<double>& mu, std::vector<double>& cov) {
  const std::size_t d = data.cols();
  const double h = static_cast<double>(subset.size());
  mu.assign(d, 0.0);
  cov.assign(d * d, 0.0);
  for (std::size_t idx : subset) {
    const auto r = data.row(idx);
    for (std::size_t j = 0; j < d; ++j) mu[j] += r[j];
  }
  for (double& m : mu) m /= h;
  for (std::size_t idx : subset) {
    const auto r = data.row(idx);
    for (std::size_t a = 0; a < d; ++a) {
      const double da = r[a] - mu[a];
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += da * (r[b] - mu[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov[a * d + b] /= h;
      cov[b * d + a] = cov[a * d + b];
    }
}

double determinant(std::span<const double> square, std::size_t d) {
  return Eigen::PartialPivLU<RowMatrix>(RowMatrix(as_matrix(square, d))).determinant();
}

std::vector<std::size_t> mcd_cstep(const FeatureMatrix& data, std::span<const std::size_t> subset,
                                   std::size_t h) {
  auto metric = metric_for(data, subset);
  if (!metric) return {subset.begin(), subset.end()};
  return closest(data, *metric, h);
}

McdResult fit_mcd(const FeatureMatrix& data, std::optional<std::size_t> h_opt,
                  const McdParams& params) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (d == 0 || n < d + 1) throw Error(ErrorCode::TooFewRows, "MCD needs at least d + 1 rows");
  for (std::size_t i = 0; i < n; ++i)
    for (double v : data.row(i))
      if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateData, "MCD input contains non-finite values");
  const std::size_t h = h_opt.value_or(mcd_default_h(n, d));
  if (h > n || h < mcd_min_h(n, d))
    throw Error(ErrorCode::BadHyperparameter,
                "MCD subset size must satisfy (n + d + 1) / 2 <= h <= n");

  Candidate best{std::numeric_limits<double>::infinity(), {}};
  bool exhaustive = false;

  if (h == n) {
    best.subset.resize(n);
    std::iota(best.subset.begin(), best.subset.end(), 0);
    best.det = subset_det(data, best.subset);
    exhaustive = true;
  } else if (choose_capped(n, h, params.exhaustive_limit) <= params.exhaustive_limit) {
    // Lexicographic enumeration of all h-subsets; first minimum wins.
    std::vector<std::size_t> comb(h);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      const double det = subset_det(data, comb);
      if (det < best.det) best = {det, comb};
      std::size_t pos = h;
      while (pos > 0 && comb[pos - 1] == n - h + pos - 1) --pos;
      if (pos == 0) break;
      ++comb[pos - 1];
      for (std::size_t q = pos; q < h; ++q) comb[q] = comb[q - 1] + 1;
    }
    exhaustive = true;
  } else {
    Rng rng(params.seed);
    std::vector<Candidate> pool;
    pool.reserve(params.random_starts);
    std::vector<std::size_t> perm(n);
    for (std::size_t s = 0; s < params.random_starts; ++s) {
      // Random (d+1)-subset, grown one point at a time until its covariance
      // is non-singular.
      std::iota(perm.begin(), perm.end(), 0);
      std::size_t taken = 0;
      auto draw = [&]() {
        const std::size_t pick = taken + static_cast<std::size_t>(rng.below(n - taken));
        std::swap(perm[taken], perm[pick]);
        ++taken;
      };
      for (std::size_t q = 0; q <= d; ++q) draw();
      std::vector<std::size_t> start(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(taken));
      while (taken < n && !(subset_det(data, start) > 0.0)) {
        draw();
        start.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(taken));
      }
      std::sort(start.begin(), start.end());
      auto subset = mcd_cstep(data, start, h);
      pool.push_back(concentrate(data, std::move(subset), h, 2));
    }
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) { return a.det < b.det; });
    pool.resize(std::min(pool.size(), params.refine_best));
    for (auto& c : pool) {
      auto refined = concentrate(data, std::move(c.subset), h, params.max_csteps);
      if (refined.det < best.det) best = std::move(refined);
    }
  }

  McdResult out;
  subset_moments(data, best.subset, out.mu, out.cov);
  out.determinant = best.det;
  out.subset = std::move(best.subset);
  out.h = h;
  out.exhaustive = exhaustive;

  const double eps = ridge_for(out.cov, d);
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw Error(ErrorCode::SingularCovariance, "MCD covariance has zero trace");
  RowMatrix reg = as_matrix(out.cov, d);
  reg.diagonal().array() += eps;
  if (!spd_inverse(reg))
    throw Error(ErrorCode::SingularCovariance, "MCD covariance is singular after regularization");
  return out;
}

EllipticEnvelopeModel make_envelope(std::vector<double> mu, std::vector<double> cov,
                                    double threshold) {
  const std::size_t d = mu.size();
  if (d == 0 || cov.size() != d * d)
    throw Error(ErrorCode::DimensionMismatch, "covariance shape does not match mean");
  RowMatrix c = as_matrix(cov, d);
  c = 0.5 * (c + c.transpose());
  auto inv = spd_inverse(c);
  if (!inv) {
    const double eps = ridge_for(cov, d);
    if (eps > 0.0 && std::isfinite(eps)) {
      c.diagonal().array() += eps;
      inv = spd_inverse(c);
    }
  }
  if (!inv) throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  EllipticEnvelopeModel m;
  m.mu = std::move(mu);
  m.cov.assign(c.data(), c.data() + d * d);
  m.cov_inv.assign(inv->data(), inv->data() + d * d);
  m.threshold = threshold;
  return m;
}

double mahalanobis(const EllipticEnvelopeModel& model, std::span<const double> x) {
  const std::size_t d = model.dim();
  if (x.size() != d) throw Error(ErrorCode::DimensionMismatch, "mahalanobis: dimension mismatch");
  double acc = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    const double da = x[a] - model.mu[a];
    double row = 0.0;
    for (std::size_t b = 0; b < d; ++b) row += model.cov_inv[a * d + b] * (x[b] - model.mu[b]);
    acc += da * row;
  }
  return std::sqrt(std::max(acc, 0.0));
}

std::vector<double> mahalanobis_batch(const EllipticEnvelopeModel& model, const FeatureMatrix& data) {
  if (data.rows() > 0 && data.cols() != model.dim())
    throw Error(ErrorCode::DimensionMismatch, "mahalanobis: dimension mismatch");
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out[i] = mahalanobis(model, data.row(i));
  return out;
}

std::vector<std::size_t> order_by_mahalanobis(const EllipticEnvelopeModel& model,
                                              const FeatureMatrix& data) {
  const auto dist = mahalanobis_batch(model, data);
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

double midpoint_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return 0.5 * (values[lo] + values[hi]);
}

EllipticEnvelopeModel train_envelope(const FeatureMatrix& data, const EnvelopeParams& params) {
  if (!(params.contamination > 0.0 && params.contamination < 0.5))
    throw Error(ErrorCode::BadHyperparameter, "contamination must lie in (0, 0.5)");
  const auto mcd = fit_mcd(data, params.h, params.mcd);
  const std::size_t d = data.cols();
  std::vector<double> cov = mcd.cov;
  const double eps = ridge_for(cov, d);
  for (std::size_t j = 0; j < d; ++j) cov[j * d + j] += eps;
  auto model = make_envelope(mcd.mu, std::move(cov));
  model.h = mcd.h;
  model.contamination = params.contamination;
  model.threshold = midpoint_quantile(mahalanobis_batch(model, data), 1.0 - params.contamination);
  return model;
}

}  // namespace radwatch
