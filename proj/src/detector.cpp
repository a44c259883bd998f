#include <cmath>

#include "radwatch/detectors.hpp"
#include "radwatch/error.hpp"

namespace radwatch {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
}  // namespace

std::string_view detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Ocsvm: return "ocsvm";
    case DetectorKind::Envelope: return "envelope";
    case DetectorKind::Lof: return "lof";
    case DetectorKind::ControlChart: return "control_chart";
  }
  return "unknown";
}

std::optional<DetectorKind> detector_from_name(std::string_view name) {
  for (auto k : {DetectorKind::Ocsvm, DetectorKind::Envelope, DetectorKind::Lof,
                 DetectorKind::ControlChart})
    if (detector_name(k) == name) return k;
  return std::nullopt;
}

DetectorModel train_detector(DetectorKind kind, const FeatureMatrix& data,
                             const DetectorConfig& config) {
  switch (kind) {
    case DetectorKind::Ocsvm: return train_ocsvm(data, config.ocsvm);
    case DetectorKind::Envelope: return train_envelope(data, config.envelope);
    case DetectorKind::Lof: return train_lof(data, config.lof);
    case DetectorKind::ControlChart: return train_control_chart(data, config.chart);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown detector kind");
}

DetectorKind kind_of(const DetectorModel& model) {
  return std::visit(overloaded{
                        [](const OcsvmModel&) { return DetectorKind::Ocsvm; },
                        [](const EllipticEnvelopeModel&) { return DetectorKind::Envelope; },
                        [](const LofModel&) { return DetectorKind::Lof; },
                        [](const ControlChartModel&) { return DetectorKind::ControlChart; },
                    },
                    model);
}

std::size_t dimension_of(const DetectorModel& model) {
  return std::visit(overloaded{
                        [](const OcsvmModel& m) { return m.support_vectors.dim; },
                        [](const EllipticEnvelopeModel& m) { return m.dim(); },
                        [](const LofModel& m) { return m.reference.dim; },
                        [](const ControlChartModel& m) { return m.mean.size(); },
                    },
                    model);
}

std::vector<double> score_rows(const DetectorModel& model, const FeatureMatrix& data) {
  if (data.rows() > 0 && data.cols() != dimension_of(model))
    throw Error(ErrorCode::DimensionMismatch,
                "model expects " + std::to_string(dimension_of(model)) + " features, got " +
                    std::to_string(data.cols()));
  std::vector<double> out(data.rows());
  std::visit(overloaded{
                 [&](const OcsvmModel& m) {
                   for (std::size_t i = 0; i < data.rows(); ++i) out[i] = ocsvm_decision(m, data.row(i));
                 },
                 [&](const EllipticEnvelopeModel& m) {
                   for (std::size_t i = 0; i < data.rows(); ++i) out[i] = mahalanobis(m, data.row(i));
                 },
                 [&](const LofModel& m) {
                   for (std::size_t i = 0; i < data.rows(); ++i) out[i] = lof_score(m, data.row(i));
                 },
                 [&](const ControlChartModel& m) {
                   for (std::size_t i = 0; i < data.rows(); ++i) {
                     double worst = 0.0;
                     const auto r = data.row(i);
                     for (std::size_t j = 0; j < r.size(); ++j) {
                       const double z = std::abs(r[j] - m.mean[j]) / m.stddev[j];
                       worst = std::isnan(z) ? z : std::max(worst, z);
                       if (std::isnan(worst)) break;
                     }
                     out[i] = worst;
                   }
                 },
             },
             model);
  return out;
}

LabelSeq predict_labels(const DetectorModel& model, const FeatureMatrix& data) {
  return labels_from_scores(model, data, score_rows(model, data));
}

LabelSeq labels_from_scores(const DetectorModel& model, const FeatureMatrix& data,
                            const std::vector<double>& scores) {
  if (scores.size() != data.rows()) throw Error(ErrorCode::LengthMismatch, "score count differs from row count");
  LabelSeq out(scores.size());
  std::visit(overloaded{
                 // Ties (f == 0) and NaN count as anomalies.
                 [&](const OcsvmModel&) {
                   for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores[i] > 0.0 ? 0 : 1;
                 },
                 [&](const EllipticEnvelopeModel& m) {
                   for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores[i] <= m.threshold ? 0 : 1;
                 },
                 [&](const LofModel& m) {
                   for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores[i] <= m.threshold ? 0 : 1;
                 },
                 [&](const ControlChartModel& m) {
                   for (std::size_t i = 0; i < out.size(); ++i) out[i] = chart_label(m, data.row(i));
                 },
             },
             model);
  return out;
}

}  // namespace radwatch
