#include <cmath>

#include "radwatch/detectors.hpp"
#include "radwatch/error.hpp"

namespace radwatch {

ControlChartModel train_control_chart(const FeatureMatrix& data, const ControlChartParams& params) {
  const std::size_t n = data.rows();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "control chart needs at least 2 rows");
  if (!(params.k_sigma > 0.0)) throw Error(ErrorCode::BadHyperparameter, "k_sigma must be positive");
  const std::size_t d = data.cols();
  ControlChartModel m;
  m.k_sigma = params.k_sigma;
  m.mean.assign(d, 0.0);
  m.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += data(i, j);
  for (double& v : m.mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = data(i, j) - m.mean[j];
      m.stddev[j] += diff * diff;
    }
  for (std::size_t j = 0; j < d; ++j) {
    // A constant channel still gets a (tiny) band so lcl < mean < ucl.
    const double floor = 1e-12 * std::max(1.0, std::abs(m.mean[j]));
    m.stddev[j] = std::max(std::sqrt(m.stddev[j] / static_cast<double>(n)), floor);
  }
  m.ucl.resize(d);
  m.lcl.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    m.ucl[j] = m.mean[j] + params.k_sigma * m.stddev[j];
    m.lcl[j] = m.mean[j] - params.k_sigma * m.stddev[j];
  }
  return m;
}

Label chart_label(const ControlChartModel& model, std::span<const double> x) {
  if (x.size() != model.mean.size()) throw Error(ErrorCode::DimensionMismatch, "chart_label: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!(x[j] >= model.lcl[j] && x[j] <= model.ucl[j])) return 1;
  return 0;
}

}  // namespace radwatch
