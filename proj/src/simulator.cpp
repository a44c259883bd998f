#include "radwatch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radwatch/error.hpp"
#include "radwatch/rng.hpp"

namespace radwatch::sim {

namespace {

enum Stream : std::uint64_t { kDoseStream = 1, kNoiseStream = 2, kTransientStream = 3 };

}  // namespace

void RadiationScenario::validate() const {
  if (!(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, name + ": rate must be positive");
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, name + ": horizon must be positive");
  if (!(window_dose > 0.0 && failure_dose_mean > window_dose))
    throw Error(ErrorCode::InvalidArgument, name + ": need failure_dose_mean > window_dose > 0");
  if (!(failure_dose_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, name + ": failure_dose_sigma < 0");
  if (!(drift_gain >= 0.0)) throw Error(ErrorCode::InvalidArgument, name + ": drift_gain < 0");
  if (!(monitor_lag_s >= 0.0)) throw Error(ErrorCode::InvalidArgument, name + ": monitor_lag_s < 0");
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0))
    throw Error(ErrorCode::InvalidArgument, name + ": dropout_prob outside [0, 1]");
  if (!(transient_prob >= 0.0 && transient_prob <= 1.0) || !(transient_scale >= 0.0))
    throw Error(ErrorCode::InvalidArgument, name + ": bad transient_prob/transient_scale");
  for (double s : noise_sigma)
    if (!(s >= 0.0)) throw Error(ErrorCode::InvalidArgument, name + ": noise sigma < 0");
}

std::array<double, kChannelCount> drift_weights() {
  std::array<double, kChannelCount> w{};
  w[index_of(ChannelId::TPmic)] = 0.5;
  w[index_of(ChannelId::TFpga)] = 0.8;
  w[index_of(ChannelId::VAux)] = -1.0;
  w[index_of(ChannelId::VDdr3)] = 0.8;
  return w;
}

ScenarioSuite default_suite(std::uint64_t seed) {
  ScenarioSuite suite;
  for (std::size_t i = 0; i < kSuiteRates.size(); ++i) {
    RadiationScenario s;
    s.name = "exp" + std::to_string(i);
    s.rate = kSuiteRates[i];
    s.seed = derive_seed(seed, 100 + i);
    if (i == 0) s.window_dose = kSlowBoardWindowDose;
    suite.scenarios.push_back(std::move(s));
  }
  return suite;
}

double dose_at(const RadiationScenario& scenario, double t_seconds) {
  if (!(t_seconds >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dose_at: time must be non-negative");
  return scenario.rate * t_seconds / 3600.0;
}

double failure_dose(const RadiationScenario& scenario) {
  Rng rng(derive_seed(scenario.seed, kDoseStream));
  const double dose = rng.normal(scenario.failure_dose_mean, scenario.failure_dose_sigma);
  return std::max(dose, 0.05 * scenario.failure_dose_mean);
}

BoardRun simulate_run(const RadiationScenario& scenario) {
  scenario.validate();
  const double fdose = failure_dose(scenario);
  const double death = fdose / scenario.rate * 3600.0;
  if (death > scenario.horizon)
    throw Error(ErrorCode::HorizonTooShort,
                scenario.name + ": death at " + format_decimal(death) + " s exceeds horizon");
  const double monitor_stop = death + scenario.monitor_lag_s;
  const double end = std::min(monitor_stop, scenario.horizon);
  const double onset = std::max(0.0, fdose - scenario.window_dose);

  std::array<double, kChannelCount> base{};
  for (ChannelId c : kAllChannels) base[index_of(c)] = nominal_value(c).value_or(0.0);
  base[index_of(ChannelId::TPmic)] = scenario.t_pmic_base;
  base[index_of(ChannelId::TFpga)] = scenario.t_fpga_base;
  const auto weights = drift_weights();
  const auto& sigma = scenario.noise_sigma;

  // Level of each channel when the DUT dies; rails collapse from here.
  std::array<double, kChannelCount> at_death{};
  for (std::size_t c = 0; c < kChannelCount; ++c)
    at_death[c] = base[c] + scenario.drift_gain * weights[c] * sigma[c];

  Rng rng(derive_seed(scenario.seed, kNoiseStream));
  Rng kicks(derive_seed(scenario.seed, kTransientStream));
  std::vector<TelemetryRecord> records;
  // The series runs to the first sample at which the monitored rails read zero.
  const auto last = static_cast<std::size_t>(monitor_stop <= scenario.horizon ? std::ceil(end) : std::floor(end));
  records.reserve(last + 1);
  for (std::size_t step = 0; step <= last; ++step) {
    const double t = static_cast<double>(step);
    const double dose = scenario.rate * t / 3600.0;
    TelemetryRecord rec;
    rec.timestamp = t;
    if (t < death) {
      const double f = std::clamp((dose - onset) / scenario.window_dose, 0.0, 1.0);
      const double inflate = 1.0 + 0.25 * scenario.drift_gain * f;
      for (ChannelId ch : kAllChannels) {
        const std::size_t c = index_of(ch);
        const double spread = is_temperature(ch) ? sigma[c] : sigma[c] * inflate;
        rec.values[c] = base[c] + scenario.drift_gain * weights[c] * sigma[c] * f + rng.normal(0.0, spread);
        if (!is_temperature(ch) && scenario.transient_prob > 0.0 && kicks.uniform() < scenario.transient_prob)
          rec.values[c] += kicks.normal(0.0, scenario.transient_scale * sigma[c]);
      }
    } else {
      const double frac = scenario.monitor_lag_s > 0.0
                              ? std::clamp((t - death) / scenario.monitor_lag_s, 0.0, 1.0)
                              : 1.0;
      for (ChannelId ch : kAllChannels) {
        const std::size_t c = index_of(ch);
        const double noise = rng.normal(0.0, sigma[c]);
        if (is_temperature(ch)) rec.values[c] = at_death[c] + noise;
        else rec.values[c] = frac >= 1.0 ? 0.0 : at_death[c] * (1.0 - frac) + noise * (1.0 - frac);
      }
    }
    if (scenario.dropout_prob > 0.0 && rng.uniform() < scenario.dropout_prob) {
      const std::size_t c = rng.uniform() < 0.5 ? index_of(ChannelId::TPmic) : index_of(ChannelId::TFpga);
      rec.values[c] = rng.uniform() < 0.5 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    }
    records.push_back(rec);
  }

  BoardRun run;
  run.board_id = scenario.name;
  run.series = TelemetrySeries(std::move(records));
  run.meta.rate_gy_per_h = scenario.rate;
  run.meta.dut_stop_s = death;
  if (monitor_stop <= scenario.horizon) run.meta.monitor_stop_s = monitor_stop;
  run.meta.origin = Origin::Simulated;
  run.validate();
  return run;
}

nlohmann::ordered_json scenario_to_json(const RadiationScenario& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["rate"] = s.rate;
  j["seed"] = s.seed;
  j["horizon"] = s.horizon;
  nlohmann::ordered_json noise;
  for (ChannelId c : kAllChannels) noise[std::string(channel_name(c))] = s.noise_sigma[index_of(c)];
  j["noise_sigma"] = std::move(noise);
  j["t_pmic_base"] = s.t_pmic_base;
  j["t_fpga_base"] = s.t_fpga_base;
  j["failure_dose_mean"] = s.failure_dose_mean;
  j["failure_dose_sigma"] = s.failure_dose_sigma;
  j["window_dose"] = s.window_dose;
  j["drift_gain"] = s.drift_gain;
  j["monitor_lag_s"] = s.monitor_lag_s;
  j["dropout_prob"] = s.dropout_prob;
  j["transient_prob"] = s.transient_prob;
  j["transient_scale"] = s.transient_scale;
  return j;
}

RadiationScenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Format, "scenario must be a JSON object");
  RadiationScenario s;
  try {
    s.name = j.value("name", s.name);
    s.rate = j.at("rate").get<double>();
    s.seed = j.value("seed", s.seed);
    s.horizon = j.value("horizon", s.horizon);
    if (j.contains("noise_sigma")) {
      const auto& noise = j.at("noise_sigma");
      if (noise.is_array()) {
        if (noise.size() != kChannelCount) throw Error(ErrorCode::Format, "noise_sigma needs 7 entries");
        for (std::size_t c = 0; c < kChannelCount; ++c) s.noise_sigma[c] = noise[c].get<double>();
      } else {
        for (const auto& [key, value] : noise.items()) {
          const auto ch = channel_from_name(key);
          if (!ch) throw Error(ErrorCode::Format, "unknown channel in noise_sigma: " + key);
          s.noise_sigma[index_of(*ch)] = value.get<double>();
        }
      }
    }
    s.t_pmic_base = j.value("t_pmic_base", s.t_pmic_base);
    s.t_fpga_base = j.value("t_fpga_base", s.t_fpga_base);
    s.failure_dose_mean = j.value("failure_dose_mean", s.failure_dose_mean);
    s.failure_dose_sigma = j.value("failure_dose_sigma", s.failure_dose_sigma);
    s.window_dose = j.value("window_dose", s.window_dose);
    s.drift_gain = j.value("drift_gain", s.drift_gain);
    s.monitor_lag_s = j.value("monitor_lag_s", s.monitor_lag_s);
    s.dropout_prob = j.value("dropout_prob", s.dropout_prob);
    s.transient_prob = j.value("transient_prob", s.transient_prob);
    s.transient_scale = j.value("transient_scale", s.transient_scale);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::ordered_json suite_to_json(const ScenarioSuite& suite) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : suite.scenarios) arr.push_back(scenario_to_json(s));
  return {{"scenarios", std::move(arr)}};
}

ScenarioSuite suite_from_json(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("scenarios")) throw Error(ErrorCode::Format, "suite needs a scenarios array");
    list = &j.at("scenarios");
  }
  if (!list->is_array() || list->empty()) throw Error(ErrorCode::Format, "suite needs a non-empty scenarios array");
  ScenarioSuite suite;
  for (const auto& s : *list) suite.scenarios.push_back(scenario_from_json(s));
  return suite;
}

}  // namespace radwatch::sim
