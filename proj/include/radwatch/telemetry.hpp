#pragma once

// Board sensor streams: data model, CSV/sidecar I/O, cleaning, annotation and
// feature extraction.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace radwatch {

enum class ChannelId : std::uint8_t { TPmic, TFpga, VCore, VAux, VDdr3, VTt, VCco };

inline constexpr std::size_t kChannelCount = 7;

inline constexpr std::array<ChannelId, kChannelCount> kAllChannels = {
    ChannelId::TPmic, ChannelId::TFpga, ChannelId::VCore, ChannelId::VAux,
    ChannelId::VDdr3, ChannelId::VTt,   ChannelId::VCco};

constexpr std::size_t index_of(ChannelId c) { return static_cast<std::size_t>(c); }

// Short name used in reports ("t_pmic", "v_core", ...).
std::string_view channel_name(ChannelId c);
// CSV column name ("t_pmic_c", "v_core_v", ...).
std::string_view channel_column(ChannelId c);
std::optional<ChannelId> channel_from_name(std::string_view name);

// Rail nominal in volts; temperatures have none.
std::optional<double> nominal_value(ChannelId c);
bool is_temperature(ChannelId c);

using SensorVector = std::array<double, kChannelCount>;

// 0 = normal, 1 = anomaly; the positive class everywhere is 1.
using Label = std::uint8_t;
using LabelSeq = std::vector<Label>;

struct TelemetryRecord {
  double timestamp = 0.0;  // seconds since run start
  SensorVector values{};
  std::optional<Label> label;

  friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

class TelemetrySeries {
 public:
  TelemetrySeries() = default;
  // Throws Error(NonMonotonicTimestamp) / Error(InvalidArgument).
  explicit TelemetrySeries(std::vector<TelemetryRecord> records,
                           double sample_period = 1.0);

  const std::vector<TelemetryRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  double sample_period() const noexcept { return sample_period_; }
  const TelemetryRecord& operator[](std::size_t i) const { return records_[i]; }

  // True when every record carries a label (vacuously true when empty).
  bool fully_labeled() const;
  std::vector<double> timestamps() const;
  LabelSeq labels() const;  // requires fully_labeled()

  bool identical_to(const TelemetrySeries& other) const;

 private:
  std::vector<TelemetryRecord> records_;
  double sample_period_ = 1.0;
};

enum class Origin { Measured, Simulated };

std::string_view origin_name(Origin o);

struct RunMetadata {
  double rate_gy_per_h = 0.0;
  std::optional<double> dut_stop_s;
  std::optional<double> monitor_stop_s;
  Origin origin = Origin::Measured;
};

struct BoardRun {
  std::string board_id;
  TelemetrySeries series;
  RunMetadata meta;

  // Throws InvalidArgument when rate < 0 or dut stop > monitor stop.
  void validate() const;
};

// ---- CSV and sidecar ------------------------------------------------------

TelemetrySeries parse_csv(std::istream& in);
TelemetrySeries parse_csv_text(std::string_view text);
void write_csv(const TelemetrySeries& series, std::ostream& out);
std::string write_csv_text(const TelemetrySeries& series);

std::string format_decimal(double v);

RunMetadata parse_sidecar(std::string_view json_text);
std::string write_sidecar(const RunMetadata& meta);

BoardRun load_run(const std::string& csv_path, const std::string& sidecar_path,
                  std::string board_id);
void save_run(const BoardRun& run, const std::string& csv_path,
              const std::string& sidecar_path);

// ---- Cleaning and annotation ---------------------------------------------

bool has_invalid_temperature(const TelemetryRecord& r);

// Drops records whose PMIC or FPGA temperature is exactly zero or non-finite.
TelemetrySeries trim_invalid(const TelemetrySeries& series);

inline constexpr std::size_t kDefaultAnnotationWindow = 300;
inline constexpr std::size_t kDefaultHeadLength = 420;

// Last min(window, len) records labeled 1, the rest 0.
BoardRun annotate_tail(const BoardRun& run,
                       std::size_t window_points = kDefaultAnnotationWindow);
TelemetrySeries annotate_tail(const TelemetrySeries& series, std::size_t window_points);

TelemetrySeries take_head(const TelemetrySeries& series,
                          std::size_t n = kDefaultHeadLength);

// ---- Features --------------------------------------------------------------

struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation

  // Zero-variance columns map to 0.
  std::vector<double> apply(std::span<const double> row) const;
};

class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t cols, std::vector<std::string> names);

  std::size_t rows() const noexcept { return cols_ == 0 ? 0 : values_.size() / cols_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  const double* data() const noexcept { return values_.data(); }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  // Throws DimensionMismatch on width mismatch.
  void append_row(std::span<const double> row, std::optional<Label> label = std::nullopt);
  // Concatenates rows; labels survive only if both sides are labeled.
  void append(const FeatureMatrix& other);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::optional<LabelSeq>& labels() const noexcept { return labels_; }
  void set_labels(std::optional<LabelSeq> labels);
  void drop_labels() { labels_.reset(); }

  const std::optional<Scaler>& scaler() const noexcept { return scaler_; }
  void set_scaler(Scaler s) { scaler_ = std::move(s); }

 private:
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::string> names_;
  std::optional<LabelSeq> labels_;
  std::optional<Scaler> scaler_;
};

enum class FeatureSet { Sensors, SensorsPlusRate };

std::string_view feature_set_name(FeatureSet f);
std::optional<FeatureSet> feature_set_from_name(std::string_view name);
std::size_t feature_width(FeatureSet f);

FeatureMatrix to_features(const BoardRun& run, bool include_rate);
inline FeatureMatrix to_features(const BoardRun& run, FeatureSet set) {
  return to_features(run, set == FeatureSet::SensorsPlusRate);
}

struct Standardized {
  FeatureMatrix train;
  std::vector<FeatureMatrix> others;
  Scaler scaler;
};

Scaler fit_scaler(const FeatureMatrix& train);
FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& m);

// Throws TooFewRows when train has fewer than 2 rows.
Standardized standardize(const FeatureMatrix& train,
                         const std::vector<FeatureMatrix>& others = {});

}  // namespace radwatch
