#include <algorithm>
#include <cmath>
#include <numeric>

#include "radwatch/detectors.hpp"
#include "radwatch/error.hpp"
#include "radwatch/kernels.hpp"

namespace radwatch {

namespace {

// Guards 1 / mean reachability against exact duplicates.
constexpr double kMinReach = 1e-10;

struct Neighbours {
  std::vector<std::size_t> index;
  std::vector<double> dist;
};

// k nearest reference points to x (ties by ascending index), optionally
// skipping one reference index.
Neighbours nearest(const PointSet& ref, std::span<const double> x, std::size_t k,
                   std::optional<std::size_t> skip, std::vector<double>& scratch) {
  const std::size_t n = ref.size();
  scratch.resize(n);
  simd::active_kernels().squared_distances(x.data(), ref.values.data(), n, ref.dim, scratch.data());
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!skip || *skip != i) order.push_back(i);
  auto less = [&](std::size_t a, std::size_t b) {
    return scratch[a] < scratch[b] || (scratch[a] == scratch[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
  Neighbours out;
  out.index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  out.dist.reserve(k);
  for (std::size_t i : out.index) out.dist.push_back(std::sqrt(scratch[i]));
  return out;
}

double local_density(const LofModel& model, const Neighbours& nb) {
  double reach = 0.0;
  for (std::size_t q = 0; q < nb.index.size(); ++q)
    reach += std::max(model.k_distances[nb.index[q]], nb.dist[q]);
  reach /= static_cast<double>(nb.index.size());
  return 1.0 / std::max(reach, kMinReach);
}

double factor(const LofModel& model, const Neighbours& nb, double own_lrd) {
  double acc = 0.0;
  for (std::size_t i : nb.index) acc += model.lrd[i];
  return acc / static_cast<double>(nb.index.size()) / own_lrd;
}

}  // namespace

LofModel train_lof(const FeatureMatrix& data, const LofParams& params) {
  const std::size_t n = data.rows();
  if (params.k < 1 || params.k >= n)
    throw Error(ErrorCode::BadK, "LOF needs 1 <= k < number of reference points");
  if (!(params.threshold > 0.0)) throw Error(ErrorCode::BadHyperparameter, "LOF threshold must be positive");
  LofModel model;
  model.reference = PointSet::from(data);
  model.k = params.k;
  model.threshold = params.threshold;
  model.k_distances.resize(n);

  std::vector<Neighbours> hoods(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    hoods[i] = nearest(model.reference, model.reference.row(i), params.k, i, scratch);
    model.k_distances[i] = hoods[i].dist.back();
  }
  model.lrd.resize(n);
  for (std::size_t i = 0; i < n; ++i) model.lrd[i] = local_density(model, hoods[i]);
  return model;
}

double lof_score(const LofModel& model, std::span<const double> x) {
  if (x.size() != model.reference.dim) throw Error(ErrorCode::DimensionMismatch, "lof_score: dimension mismatch");
  std::vector<double> scratch;
  const auto nb = nearest(model.reference, x, model.k, std::nullopt, scratch);
  return factor(model, nb, local_density(model, nb));
}

std::vector<double> lof_training_scores(const LofModel& model) {
  const std::size_t n = model.reference.size();
  std::vector<double> out(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = nearest(model.reference, model.reference.row(i), model.k, i, scratch);
    out[i] = factor(model, nb, model.lrd[i]);
  }
  return out;
}

}  // namespace radwatch
