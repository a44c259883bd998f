#include "radwatch/telemetry.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "radwatch/error.hpp"

namespace radwatch {

namespace {

constexpr std::array<std::string_view, kChannelCount> kNames = {
    "t_pmic", "t_fpga", "v_core", "v_aux", "v_ddr3", "v_tt", "v_cco"};
constexpr std::array<std::string_view, kChannelCount> kColumns = {
    "t_pmic_c", "t_fpga_c", "v_core_v", "v_aux_v", "v_ddr3_v", "v_tt_v", "v_cco_v"};

constexpr std::string_view kTimeColumn = "time_s";
constexpr std::string_view kLabelColumn = "label";
constexpr std::string_view kRateColumn = "rate_gy_per_h";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view field) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return v;
}

bool is_header(std::string_view line) { return line.starts_with(kTimeColumn); }

}  // namespace

std::string_view channel_name(ChannelId c) { return kNames[index_of(c)]; }
std::string_view channel_column(ChannelId c) { return kColumns[index_of(c)]; }

std::optional<ChannelId> channel_from_name(std::string_view name) {
  for (ChannelId c : kAllChannels)
    if (channel_name(c) == name || channel_column(c) == name) return c;
  return std::nullopt;
}

std::optional<double> nominal_value(ChannelId c) {
  switch (c) {
    case ChannelId::VCore: return 1.0;
    case ChannelId::VAux: return 1.8;
    case ChannelId::VDdr3: return 1.35;
    case ChannelId::VTt: return 0.675;
    case ChannelId::VCco: return 3.3;
    default: return std::nullopt;
  }
}

bool is_temperature(ChannelId c) { return c == ChannelId::TPmic || c == ChannelId::TFpga; }

std::string_view origin_name(Origin o) {
  return o == Origin::Measured ? "measured" : "simulated";
}

// ---- TelemetrySeries -------------------------------------------------------

TelemetrySeries::TelemetrySeries(std::vector<TelemetryRecord> records, double sample_period)
    : records_(std::move(records)), sample_period_(sample_period) {
  if (!(sample_period_ > 0.0) || !std::isfinite(sample_period_))
    throw Error(ErrorCode::InvalidArgument, "sample period must be positive");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!std::isfinite(r.timestamp) || r.timestamp < 0.0)
      throw Error(ErrorCode::InvalidArgument,
                  "timestamp must be finite and non-negative at record " + std::to_string(i));
    if (i > 0 && r.timestamp < records_[i - 1].timestamp)
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  "timestamp decreases at record " + std::to_string(i));
    if (r.label && *r.label > 1)
      throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1");
  }
}

bool TelemetrySeries::fully_labeled() const {
  return std::all_of(records_.begin(), records_.end(),
                     [](const TelemetryRecord& r) { return r.label.has_value(); });
}

std::vector<double> TelemetrySeries::timestamps() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.timestamp);
  return out;
}

LabelSeq TelemetrySeries::labels() const {
  LabelSeq out;
  out.reserve(records_.size());
  for (const auto& r : records_) {
    if (!r.label) throw Error(ErrorCode::InvalidArgument, "series is not labeled");
    out.push_back(*r.label);
  }
  return out;
}

bool TelemetrySeries::identical_to(const TelemetrySeries& other) const {
  if (size() != other.size() || sample_period_ != other.sample_period_) return false;
  // Bitwise comparison so NaN readings compare equal to themselves.
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = records_[i];
    const auto& b = other.records_[i];
    if (std::bit_cast<std::uint64_t>(a.timestamp) != std::bit_cast<std::uint64_t>(b.timestamp))
      return false;
    for (std::size_t c = 0; c < kChannelCount; ++c)
      if (std::bit_cast<std::uint64_t>(a.values[c]) != std::bit_cast<std::uint64_t>(b.values[c]))
        return false;
    if (a.label != b.label) return false;
  }
  return true;
}

void BoardRun::validate() const {
  if (!(meta.rate_gy_per_h >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "radiation rate must be non-negative");
  if (meta.dut_stop_s && meta.monitor_stop_s && *meta.dut_stop_s > *meta.monitor_stop_s)
    throw Error(ErrorCode::InvalidArgument, "DUT stop time after monitor stop time");
}

// ---- CSV -------------------------------------------------------------------

std::string format_decimal(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

TelemetrySeries parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool with_label = false;
  std::vector<TelemetryRecord> records;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (is_header(line)) {
      if (have_header) throw Error(ErrorCode::MalformedRow, "duplicate header", line_no);
      const auto cols = split_commas(line);
      with_label = cols.size() == kChannelCount + 2;
      if (cols.size() != kChannelCount + 1 && !with_label)
        throw Error(ErrorCode::MalformedRow, "unexpected header width", line_no);
      bool ok = cols[0] == kTimeColumn;
      for (std::size_t c = 0; c < kChannelCount; ++c) ok = ok && cols[c + 1] == kColumns[c];
      if (with_label) ok = ok && cols.back() == kLabelColumn;
      if (!ok) throw Error(ErrorCode::MalformedRow, "unrecognised header", line_no);
      have_header = true;
      continue;
    }
    if (!have_header) throw Error(ErrorCode::MalformedRow, "missing header", line_no);

    const auto fields = split_commas(line);
    const std::size_t expected = kChannelCount + 1 + (with_label ? 1 : 0);
    if (fields.size() != expected)
      throw Error(ErrorCode::MalformedRow,
                  "expected " + std::to_string(expected) + " columns, got " +
                      std::to_string(fields.size()),
                  line_no);

    TelemetryRecord rec;
    const auto t = parse_double(fields[0]);
    if (!t || !std::isfinite(*t) || *t < 0.0)
      throw Error(ErrorCode::MalformedRow, "bad timestamp", line_no);
    rec.timestamp = *t;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const auto v = parse_double(fields[c + 1]);
      if (!v) throw Error(ErrorCode::MalformedRow, "bad value in column " + std::to_string(c + 2), line_no);
      rec.values[c] = *v;
    }
    if (with_label) {
      if (fields.back() == "0") rec.label = 0;
      else if (fields.back() == "1") rec.label = 1;
      else throw Error(ErrorCode::MalformedRow, "label must be 0 or 1", line_no);
    }
    if (!records.empty() && rec.timestamp < records.back().timestamp)
      throw Error(ErrorCode::NonMonotonicTimestamp, "timestamp decreases", line_no);
    records.push_back(rec);
  }
  if (!have_header) throw Error(ErrorCode::EmptyFile, "no header found");
  return TelemetrySeries(std::move(records));
}

TelemetrySeries parse_csv_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_csv(in);
}

void write_csv(const TelemetrySeries& series, std::ostream& out) {
  const bool with_label = !series.empty() && series.fully_labeled();
  out << kTimeColumn;
  for (auto col : kColumns) out << ',' << col;
  if (with_label) out << ',' << kLabelColumn;
  out << '\n';
  for (const auto& r : series.records()) {
    out << format_decimal(r.timestamp);
    for (double v : r.values) out << ',' << format_decimal(v);
    if (with_label) out << ',' << static_cast<int>(*r.label);
    out << '\n';
  }
}

std::string write_csv_text(const TelemetrySeries& series) {
  std::ostringstream out;
  write_csv(series, out);
  return out.str();
}

RunMetadata parse_sidecar(std::string_view json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Format, std::string("sidecar: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Format, "sidecar must be a JSON object");
  RunMetadata m;
  try {
    m.rate_gy_per_h = j.at("rate_gy_per_h").get<double>();
    if (j.contains("dut_stop_s") && !j["dut_stop_s"].is_null())
      m.dut_stop_s = j["dut_stop_s"].get<double>();
    if (j.contains("monitor_stop_s") && !j["monitor_stop_s"].is_null())
      m.monitor_stop_s = j["monitor_stop_s"].get<double>();
    const std::string origin = j.value("origin", "measured");
    if (origin == "measured") m.origin = Origin::Measured;
    else if (origin == "simulated") m.origin = Origin::Simulated;
    else throw Error(ErrorCode::Format, "sidecar origin must be measured or simulated");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("sidecar: ") + e.what());
  }
  return m;
}

std::string write_sidecar(const RunMetadata& meta) {
  nlohmann::ordered_json j;
  j["rate_gy_per_h"] = meta.rate_gy_per_h;
  j["dut_stop_s"] = meta.dut_stop_s ? nlohmann::ordered_json(*meta.dut_stop_s) : nullptr;
  j["monitor_stop_s"] =
      meta.monitor_stop_s ? nlohmann::ordered_json(*meta.monitor_stop_s) : nullptr;
  j["origin"] = origin_name(meta.origin);
  return j.dump(2) + "\n";
}

static std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BoardRun load_run(const std::string& csv_path, const std::string& sidecar_path,
                  std::string board_id) {
  BoardRun run;
  run.board_id = std::move(board_id);
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + csv_path);
  run.series = parse_csv(in);
  run.meta = parse_sidecar(slurp(sidecar_path));
  run.validate();
  return run;
}

void save_run(const BoardRun& run, const std::string& csv_path,
              const std::string& sidecar_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw Error(ErrorCode::Io, "cannot write " + csv_path);
  write_csv(run.series, csv);
  std::ofstream side(sidecar_path, std::ios::binary);
  if (!side) throw Error(ErrorCode::Io, "cannot write " + sidecar_path);
  side << write_sidecar(run.meta);
  if (!csv || !side) throw Error(ErrorCode::Io, "write failed for " + csv_path);
}

// ---- Cleaning and annotation ----------------------------------------------

bool has_invalid_temperature(const TelemetryRecord& r) {
  for (ChannelId c : {ChannelId::TPmic, ChannelId::TFpga}) {
    const double v = r.values[index_of(c)];
    if (v == 0.0 || !std::isfinite(v)) return true;
  }
  return false;
}

TelemetrySeries trim_invalid(const TelemetrySeries& series) {
  std::vector<TelemetryRecord> kept;
  kept.reserve(series.size());
  for (const auto& r : series.records())
    if (!has_invalid_temperature(r)) kept.push_back(r);
  return TelemetrySeries(std::move(kept), series.sample_period());
}

TelemetrySeries annotate_tail(const TelemetrySeries& series, std::size_t window_points) {
  std::vector<TelemetryRecord> recs = series.records();
  const std::size_t n = recs.size();
  const std::size_t first_anomaly = n - std::min(window_points, n);
  for (std::size_t i = 0; i < n; ++i) recs[i].label = i >= first_anomaly ? 1 : 0;
  return TelemetrySeries(std::move(recs), series.sample_period());
}

BoardRun annotate_tail(const BoardRun& run, std::size_t window_points) {
  BoardRun out = run;
  out.series = annotate_tail(run.series, window_points);
  return out;
}

TelemetrySeries take_head(const TelemetrySeries& series, std::size_t n) {
  const auto& recs = series.records();
  const auto count = static_cast<std::ptrdiff_t>(std::min(n, recs.size()));
  return TelemetrySeries({recs.begin(), recs.begin() + count}, series.sample_period());
}

// ---- Features ----------------------------------------------------------------

std::vector<double> Scaler::apply(std::span<const double> row) const {
  if (row.size() != mean.size())
    throw Error(ErrorCode::DimensionMismatch, "scaler width differs from row width");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j)
    out[j] = stddev[j] > 0.0 ? (row[j] - mean[j]) / stddev[j] : 0.0;
  return out;
}

FeatureMatrix::FeatureMatrix(std::size_t cols, std::vector<std::string> names)
    : cols_(cols), names_(std::move(names)) {
  if (cols_ == 0) throw Error(ErrorCode::InvalidArgument, "feature matrix needs at least one column");
  if (!names_.empty() && names_.size() != cols_)
    throw Error(ErrorCode::DimensionMismatch, "feature name count differs from width");
}

void FeatureMatrix::append_row(std::span<const double> row, std::optional<Label> label) {
  if (row.size() != cols_)
    throw Error(ErrorCode::DimensionMismatch,
                "row width " + std::to_string(row.size()) + " != " + std::to_string(cols_));
  const std::size_t before = rows();
  values_.insert(values_.end(), row.begin(), row.end());
  if (label) {
    if (!labels_) {
      if (before != 0) throw Error(ErrorCode::InvalidArgument, "mixing labeled and unlabeled rows");
      labels_.emplace();
    }
    labels_->push_back(*label);
  } else if (labels_) {
    throw Error(ErrorCode::InvalidArgument, "mixing labeled and unlabeled rows");
  }
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (other.empty()) return;
  if (cols_ == 0) {
    *this = other;
    return;
  }
  if (other.cols_ != cols_) throw Error(ErrorCode::DimensionMismatch, "width mismatch in append");
  const bool keep_labels = (empty() || labels_) && other.labels_;
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  if (keep_labels) {
    if (!labels_) labels_.emplace();
    labels_->insert(labels_->end(), other.labels_->begin(), other.labels_->end());
  } else {
    labels_.reset();
  }
}

void FeatureMatrix::set_labels(std::optional<LabelSeq> labels) {
  if (labels && labels->size() != rows())
    throw Error(ErrorCode::LengthMismatch, "label count differs from row count");
  labels_ = std::move(labels);
}

std::string_view feature_set_name(FeatureSet f) {
  return f == FeatureSet::Sensors ? "sensors" : "sensors_plus_rate";
}

std::optional<FeatureSet> feature_set_from_name(std::string_view name) {
  if (name == "sensors") return FeatureSet::Sensors;
  if (name == "sensors_plus_rate") return FeatureSet::SensorsPlusRate;
  return std::nullopt;
}

std::size_t feature_width(FeatureSet f) {
  return f == FeatureSet::Sensors ? kChannelCount : kChannelCount + 1;
}

FeatureMatrix to_features(const BoardRun& run, bool include_rate) {
  std::vector<std::string> names(kColumns.begin(), kColumns.end());
  if (include_rate) names.emplace_back(kRateColumn);
  const std::size_t width = names.size();
  FeatureMatrix m(width, std::move(names));
  const bool labeled = !run.series.empty() && run.series.fully_labeled();
  std::vector<double> row(m.cols());
  for (const auto& r : run.series.records()) {
    std::copy(r.values.begin(), r.values.end(), row.begin());
    if (include_rate) row[kChannelCount] = run.meta.rate_gy_per_h;
    m.append_row(row, labeled ? r.label : std::nullopt);
  }
  return m;
}

Scaler fit_scaler(const FeatureMatrix& train) {
  if (train.rows() < 2) throw Error(ErrorCode::TooFewRows, "standardize needs at least 2 rows");
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  Scaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += train(i, j);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = train(i, j) - mean;
      ss += diff * diff;
    }
    s.mean[j] = mean;
    s.stddev[j] = std::sqrt(ss / static_cast<double>(n));
  }
  return s;
}

FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& m) {
  FeatureMatrix out(m.cols(), m.names());
  for (std::size_t i = 0; i < m.rows(); ++i) out.append_row(scaler.apply(m.row(i)));
  out.set_labels(m.labels());
  out.set_scaler(scaler);
  return out;
}

Standardized standardize(const FeatureMatrix& train, const std::vector<FeatureMatrix>& others) {
  Standardized out;
  out.scaler = fit_scaler(train);
  out.train = apply_scaler(out.scaler, train);
  out.others.reserve(others.size());
  for (const auto& m : others) out.others.push_back(apply_scaler(out.scaler, m));
  return out;
}

}  // namespace radwatch
