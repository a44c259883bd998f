#pragma once

// Evaluation: confusion metrics, debounced detection, lead times, training
// set construction and the three training strategies.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "radwatch/detectors.hpp"
#include "radwatch/model_io.hpp"
#include "radwatch/telemetry.hpp"

namespace radwatch {

// ---- Metrics ----------------------------------------------------------------

struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // nullopt = undefined (zero denominator); never coerced to 0.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::string model_kind;
  std::string board_id;
};

// Anomaly (1) is the positive class. Throws LengthMismatch.
EvalReport precision_recall_f1(const LabelSeq& pred, const LabelSeq& truth);

struct DetectionPolicy {
  std::size_t debounce_m = 3;  // consecutive anomaly labels that make a detection
};

// Timestamp of the first index that opens a run of >= debounce_m ones.
std::optional<double> detection_time(const LabelSeq& labels, const std::vector<double>& timestamps,
                                     const DetectionPolicy& policy = {});

struct LeadTimeReport {
  std::string board_id;
  std::optional<double> detection_time;
  double annotation_start = 0.0;
  std::optional<double> lead_vs_annotation;  // annotation_start - detection; negative = late
  std::optional<double> lead_vs_death;       // dut_stop_time - detection
  bool saved = false;                        // detection exists and lead_vs_death > 0
};

LeadTimeReport lead_time(const BoardRun& run, std::optional<double> detection, double annotation_start);

// Timestamp of the first labeled anomaly; nullopt when none.
std::optional<double> annotation_start(const TelemetrySeries& annotated);

struct MeanMetrics {
  std::size_t boards = 0;
  std::optional<double> precision, recall, f1;
  // Boards whose metric was undefined and left out of the mean.
  std::size_t undefined_precision = 0, undefined_recall = 0, undefined_f1 = 0;
};

MeanMetrics mean_metrics(const std::vector<EvalReport>& reports);

// ---- Training set -----------------------------------------------------------

struct TrainingOptions {
  std::optional<std::size_t> head_n = kDefaultHeadLength;  // nullopt = whole series
  std::size_t annotate_w = kDefaultAnnotationWindow;
  FeatureSet feature_set = FeatureSet::Sensors;
  // true: head_n points from each board; false: head_n points in total, split
  // evenly across boards (remainder to the first boards by id).
  bool per_board_head = true;
};

struct TrainingSet {
  FeatureMatrix train;                      // unlabeled
  std::vector<FeatureMatrix> heads;         // per-board training rows
  std::vector<FeatureMatrix> eval_sets;     // labeled, one per board
  std::vector<TelemetrySeries> eval_series; // trimmed + annotated
  std::vector<std::string> board_ids;
};

// Throws EmptyAfterTrim / InvalidArgument.
TrainingSet build_training_set(const std::vector<BoardRun>& runs, const TrainingOptions& options = {});

// ---- Pipeline ---------------------------------------------------------------

struct PipelineConfig {
  DetectorKind detector = DetectorKind::Ocsvm;
  DetectorConfig detectors;
  DetectionPolicy policy;
  TrainingOptions training;
  bool standardize = true;
  std::uint64_t seed = 2021;  // feeds every randomized step (MCD starts)
};

nlohmann::ordered_json config_to_json(const PipelineConfig& config);
// Missing fields keep the defaults of `base`. Throws Format / BadHyperparameter.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct BoardResult {
  EvalReport eval;
  LeadTimeReport lead;
  LabelSeq predictions;
  std::vector<double> scores;
};

struct PipelineResult {
  PipelineConfig config;
  ModelBundle model;
  std::vector<BoardResult> boards;
  MeanMetrics mean;
};

// Trains the configured detector on the training set and evaluates each
// board. Train/evaluate only; no file I/O.
PipelineResult run_pipeline(const std::vector<BoardRun>& runs, const PipelineConfig& config);

// Same, on a prepared training set and an already chosen training matrix.
PipelineResult evaluate_on(const std::vector<BoardRun>& runs, const TrainingSet& set,
                           const FeatureMatrix& train, const PipelineConfig& config);

// Scores one board with an existing model bundle.
BoardResult score_board(const ModelBundle& bundle, const BoardRun& run, const TelemetrySeries& annotated,
                        const FeatureMatrix& features, const DetectionPolicy& policy);

// ---- Strategies -------------------------------------------------------------

enum class SweepStrategy { PerBoard, BoardSubsets, HeadLengths };

std::string_view strategy_name(SweepStrategy s);
std::optional<SweepStrategy> strategy_from_name(std::string_view name);

struct SweepConfig {
  SweepStrategy strategy = SweepStrategy::HeadLengths;
  std::vector<std::optional<std::size_t>> head_lengths = {300, 360, 420, 480, 520, std::nullopt};
  std::vector<std::size_t> subset_sizes = {2, 3, 4, 5, 6};
  std::vector<FeatureSet> feature_sets = {FeatureSet::Sensors};
  PipelineConfig base;
};

struct SweepCell {
  std::string key;
  std::vector<std::size_t> train_boards;   // indices into the run list
  std::optional<std::size_t> head_n;
  FeatureSet feature_set = FeatureSet::Sensors;
  std::vector<EvalReport> reports;
  MeanMetrics mean;
};

struct SweepSummaryRow {
  std::string group;  // subset size, head length or board id
  std::string best_key;
  std::string worst_key;
  std::optional<double> best_f1;
  std::optional<double> worst_f1;
  std::optional<double> mean_f1;
};

struct SweepReport {
  SweepConfig config;
  std::vector<SweepCell> cells;  // deterministic order
  std::vector<SweepSummaryRow> summary;
};

// Number of cells run_sweep will evaluate for `n_boards` runs.
std::size_t expected_cell_count(const SweepConfig& cfg, std::size_t n_boards);

SweepReport run_sweep(const SweepConfig& cfg, const std::vector<BoardRun>& runs);

struct ModelComparison {
  DetectorKind kind;
  std::vector<EvalReport> reports;
  std::vector<LeadTimeReport> leads;
  MeanMetrics mean;
};

struct ComparisonReport {
  PipelineConfig config;
  std::vector<ModelComparison> models;
};

ComparisonReport compare_models(const std::vector<BoardRun>& runs, const PipelineConfig& base,
                                const std::vector<DetectorKind>& kinds = {
                                    DetectorKind::Envelope, DetectorKind::Lof, DetectorKind::Ocsvm,
                                    DetectorKind::ControlChart});

// ---- Report output ----------------------------------------------------------

nlohmann::ordered_json to_json(const EvalReport& r);
nlohmann::ordered_json to_json(const LeadTimeReport& r);
nlohmann::ordered_json to_json(const MeanMetrics& m);
nlohmann::ordered_json to_json(const PipelineResult& r);
nlohmann::ordered_json to_json(const SweepReport& r);
nlohmann::ordered_json to_json(const ComparisonReport& r);

// Flat CSV of per-board evaluation rows.
void write_eval_csv(const std::vector<EvalReport>& reports, std::ostream& out);

// Tidy long-format plot data: board_id,time_s,track,series,value with tracks
// voltage, temperature, annotation and model (one row per sample and series).
void write_plot_data(const TrainingSet& set, const PipelineResult& result, std::ostream& out);

}  // namespace radwatch
