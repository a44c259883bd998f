#pragma once

#include <optional>

#include "radwatch/error.hpp"
#include "radwatch/rng.hpp"
#include "radwatch/telemetry.hpp"

namespace testing {

template <class F>
std::optional<radwatch::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const radwatch::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline radwatch::FeatureMatrix gaussian_matrix(radwatch::Rng& rng, std::size_t n, std::size_t d,
                                               double sigma = 1.0) {
  radwatch::FeatureMatrix m(d, {});
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : row) x = rng.normal(0.0, sigma);
    m.append_row(row);
  }
  return m;
}

inline radwatch::TelemetryRecord record(double t, double fill = 1.0) {
  radwatch::TelemetryRecord r;
  r.timestamp = t;
  r.values.fill(fill);
  r.values[0] = 40.0;
  r.values[1] = 45.0;
  return r;
}

inline radwatch::TelemetrySeries ramp_series(std::size_t n) {
  std::vector<radwatch::TelemetryRecord> recs;
  for (std::size_t i = 0; i < n; ++i) recs.push_back(record(static_cast<double>(i), 1.0 + 0.001 * i));
  return radwatch::TelemetrySeries(std::move(recs));
}

}  // namespace testing
