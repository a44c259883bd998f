#pragma once

// Anomaly detectors. Each one trains on presumed-normal rows and produces an
// immutable model that scores and labels new rows (1 = anomaly).
//
//   OcsvmModel             one-class SVM, RBF kernel, pairwise dual solver
//   EllipticEnvelopeModel  MCD mean/covariance + Mahalanobis cutoff
//   LofModel               local outlier factor over a reference set
//   ControlChartModel      per-channel mean +/- k sigma limits (baseline)

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "radwatch/telemetry.hpp"

namespace radwatch {

// Row-major point set shared by the models that keep training vectors.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t size() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  static PointSet from(const FeatureMatrix& m);
};

// ---- Kernels ----------------------------------------------------------------

// exp(-gamma * ||x - y||^2). Throws DimensionMismatch / BadHyperparameter.
double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

enum class KernelKind { Rbf, Linear };

// ---- One-class SVM ----------------------------------------------------------

enum class GammaRule {
  Scale,   // 1 / (d * var(train)), variance over every entry
  Median,  // 1 / median pairwise squared distance
};

struct OcsvmParams {
  double nu = 0.05;
  std::optional<double> gamma;  // overrides gamma_rule when set
  GammaRule gamma_rule = GammaRule::Scale;
  double tol = 1e-4;               // KKT violation bound (max gap between pair gradients)
  std::size_t max_iter = 100'000;  // pair updates
  std::size_t cache_mb = 256;      // kernel row cache budget
};

// Solution of
//   min_a 1/2 sum_ij a_i a_j K(x_i, x_j)   s.t.  0 <= a_i <= 1/(nu l),  sum a_i = 1
// with the full alpha vector (one per training row).
struct OcsvmDualSolution {
  std::vector<double> alphas;
  std::vector<double> gradient;  // Q a
  double rho = 0.0;              // offset b: f(x) = sum a_i K(x_i, x) - rho
  double objective = 0.0;
  double upper_bound = 0.0;      // 1/(nu l)
  double kkt_gap = 0.0;          // final max violating-pair gap
  std::size_t iterations = 0;
  bool converged = false;
};

OcsvmDualSolution solve_ocsvm_dual(const FeatureMatrix& data, double nu, double gamma,
                                   double tol, std::size_t max_iter,
                                   KernelKind kernel = KernelKind::Rbf,
                                   std::size_t cache_mb = 256);

double resolve_gamma(const FeatureMatrix& data, const OcsvmParams& params);

struct OcsvmModel {
  PointSet support_vectors;
  std::vector<double> alphas;
  double offset = 0.0;  // stored so that f(x) = sum a_i K(s_i, x) - offset
  double gamma = 1.0;
  double nu = 0.05;
  std::size_t train_size = 0;
  // Training diagnostics. converged == false is the convergence warning.
  bool converged = true;
  std::size_t iterations = 0;
  double objective = 0.0;
  double tol = 1e-4;
  std::size_t max_iter = 100'000;
};

OcsvmModel train_ocsvm(const FeatureMatrix& data, const OcsvmParams& params = {});

// Positive inside the learned region. Label is normal iff f(x) > 0.
double ocsvm_decision(const OcsvmModel& model, std::span<const double> x);

// ---- Elliptical envelope ----------------------------------------------------

struct McdParams {
  std::size_t random_starts = 500;
  std::size_t refine_best = 10;
  std::size_t exhaustive_limit = 50'000;  // enumerate every h-subset up to this count
  std::size_t max_csteps = 100;
  std::uint64_t seed = 0x5eed'3cd1ULL;
};

struct McdResult {
  std::vector<double> mu;
  std::vector<double> cov;  // d x d row-major, raw h-subset covariance (divisor h)
  double determinant = 0.0; // det(cov) of the chosen subset, before the ridge
  std::vector<std::size_t> subset;  // sorted row indices
  std::size_t h = 0;
  bool exhaustive = false;
};

// Smallest admissible subset size, floor((n + d + 1) / 2).
std::size_t mcd_min_h(std::size_t n, std::size_t d);
// ceil(0.75 n), raised to mcd_min_h when needed.
std::size_t mcd_default_h(std::size_t n, std::size_t d);

// Mean and covariance (divisor = number of rows) of the selected rows.
void subset_moments(const FeatureMatrix& data, std::span<const std::size_t> subset,
                    std::vector<double>& mu, std::vector<double>& cov);
double determinant(std::span<const double> square, std::size_t d);

// One concentration step: h rows closest to (mu, cov) in Mahalanobis distance.
std::vector<std::size_t> mcd_cstep(const FeatureMatrix& data,
                                   std::span<const std::size_t> subset, std::size_t h);

McdResult fit_mcd(const FeatureMatrix& data, std::optional<std::size_t> h = std::nullopt,
                  const McdParams& params = {});

struct EllipticEnvelopeModel {
  std::vector<double> mu;
  std::vector<double> cov;      // as used for distances (ridge included)
  std::vector<double> cov_inv;
  double threshold = 0.0;
  std::size_t h = 0;
  double contamination = 0.05;

  std::size_t dim() const noexcept { return mu.size(); }
};

// Builds the distance machinery for an explicit mean/covariance. The
// covariance must be symmetric positive definite; when the plain Cholesky
// factorization fails a ridge of 1e-9 * trace / d is added, and
// SingularCovariance is thrown if that still fails.
EllipticEnvelopeModel make_envelope(std::vector<double> mu, std::vector<double> cov,
                                    double threshold = 0.0);

struct EnvelopeParams {
  double contamination = 0.05;
  std::optional<std::size_t> h;
  McdParams mcd;
};

EllipticEnvelopeModel train_envelope(const FeatureMatrix& data,
                                     const EnvelopeParams& params = {});

double mahalanobis(const EllipticEnvelopeModel& model, std::span<const double> x);
std::vector<double> mahalanobis_batch(const EllipticEnvelopeModel& model,
                                      const FeatureMatrix& data);
// Row indices in ascending distance order (ties by index).
std::vector<std::size_t> order_by_mahalanobis(const EllipticEnvelopeModel& model,
                                              const FeatureMatrix& data);

// Quantile with midpoint interpolation between the two bracketing order
// statistics at position q * (n - 1).
double midpoint_quantile(std::vector<double> values, double q);

// ---- Local outlier factor -------------------------------------------------

struct LofParams {
  std::size_t k = 20;
  double threshold = 1.5;
};

struct LofModel {
  PointSet reference;
  std::size_t k = 20;
  std::vector<double> k_distances;
  std::vector<double> lrd;
  double threshold = 1.5;
};

LofModel train_lof(const FeatureMatrix& data, const LofParams& params = {});

// Score of a new point against the reference set. A query equal to a
// reference point still counts that point as a neighbour.
double lof_score(const LofModel& model, std::span<const double> x);
// Classical LOF of each reference point within its own set (self excluded).
std::vector<double> lof_training_scores(const LofModel& model);

// ---- Control chart ----------------------------------------------------------

struct ControlChartParams {
  double k_sigma = 3.0;
};

struct ControlChartModel {
  std::vector<double> mean;
  std::vector<double> stddev;
  double k_sigma = 3.0;
  std::vector<double> ucl;
  std::vector<double> lcl;
};

ControlChartModel train_control_chart(const FeatureMatrix& data,
                                      const ControlChartParams& params = {});
Label chart_label(const ControlChartModel& model, std::span<const double> x);

// ---- Uniform interface ----------------------------------------------------

enum class DetectorKind { Ocsvm, Envelope, Lof, ControlChart };

std::string_view detector_name(DetectorKind kind);
std::optional<DetectorKind> detector_from_name(std::string_view name);

using DetectorModel =
    std::variant<OcsvmModel, EllipticEnvelopeModel, LofModel, ControlChartModel>;

struct DetectorConfig {
  OcsvmParams ocsvm;
  EnvelopeParams envelope;
  LofParams lof;
  ControlChartParams chart;
};

DetectorModel train_detector(DetectorKind kind, const FeatureMatrix& data,
                             const DetectorConfig& config = {});

DetectorKind kind_of(const DetectorModel& model);
std::size_t dimension_of(const DetectorModel& model);

// Raw per-row score: OCSVM decision value, Mahalanobis distance, LOF, or the
// largest |x - mean| / stddev over channels for the control chart.
std::vector<double> score_rows(const DetectorModel& model, const FeatureMatrix& data);

// Per-row labels in input order, 1 = anomaly.
LabelSeq predict_labels(const DetectorModel& model, const FeatureMatrix& data);

// Labels for scores already produced by score_rows on the same rows.
LabelSeq labels_from_scores(const DetectorModel& model, const FeatureMatrix& data,
                            const std::vector<double>& scores);

}  // namespace radwatch
