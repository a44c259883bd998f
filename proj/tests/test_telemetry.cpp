#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "radwatch/telemetry.hpp"
#include "support.hpp"

using namespace radwatch;
using testing::error_code;

namespace {

const char* kHeader = "time_s,t_pmic_c,t_fpga_c,v_core_v,v_aux_v,v_ddr3_v,v_tt_v,v_cco_v\n";

}

TEST_CASE("channels and nominal rails") {
  CHECK(kAllChannels.size() == 7);
  CHECK(*nominal_value(ChannelId::VCore) == 1.0);
  CHECK(*nominal_value(ChannelId::VAux) == 1.8);
  CHECK(*nominal_value(ChannelId::VDdr3) == 1.35);
  CHECK(*nominal_value(ChannelId::VTt) == 0.675);
  CHECK(*nominal_value(ChannelId::VCco) == 3.3);
  CHECK_FALSE(nominal_value(ChannelId::TPmic));
  CHECK_FALSE(nominal_value(ChannelId::TFpga));
  for (ChannelId c : kAllChannels) CHECK(channel_from_name(channel_name(c)) == c);
}

TEST_CASE("parse_csv accepts a header and two rows") {
  const std::string text = std::string(kHeader) +
                           "0,40,45,1,1.8,1.35,0.675,3.3\n"
                           "1,40.5,45.25,0.999,1.801,1.349,0.675,3.301\n";
  const auto s = parse_csv_text(text);
  REQUIRE(s.size() == 2);
  CHECK(s[1].timestamp == 1.0);
  CHECK(s[1].values[index_of(ChannelId::TFpga)] == 45.25);
  CHECK_FALSE(s.fully_labeled());
}

TEST_CASE("parse_csv errors") {
  SUBCASE("short row") {
    const std::string text = std::string(kHeader) + "0,40,45,1,1.8,1.35,0.675\n";
    try {
      parse_csv_text(text);
      FAIL("expected MalformedRow");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedRow);
      CHECK(e.line() == 2u);
    }
  }
  SUBCASE("decreasing timestamps") {
    const std::string text = std::string(kHeader) + "5,40,45,1,1.8,1.35,0.675,3.3\n3,40,45,1,1.8,1.35,0.675,3.3\n";
    try {
      parse_csv_text(text);
      FAIL("expected NonMonotonicTimestamp");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonMonotonicTimestamp);
      CHECK(e.line() == 3u);
    }
  }
  SUBCASE("empty input") { CHECK(error_code([] { parse_csv_text(""); }) == ErrorCode::EmptyFile); }
  SUBCASE("duplicate header") {
    const std::string text = std::string(kHeader) + "0,40,45,1,1.8,1.35,0.675,3.3\n" + kHeader;
    CHECK(error_code([&] { parse_csv_text(text); }) == ErrorCode::MalformedRow);
  }
  SUBCASE("label out of range") {
    const std::string text =
        "time_s,t_pmic_c,t_fpga_c,v_core_v,v_aux_v,v_ddr3_v,v_tt_v,v_cco_v,label\n0,40,45,1,1.8,1.35,0.675,3.3,2\n";
    CHECK(error_code([&] { parse_csv_text(text); }) == ErrorCode::MalformedRow);
  }
}

TEST_CASE("csv round trip is bit exact, including nan and labels") {
  Rng rng(11);
  std::vector<TelemetryRecord> recs;
  for (int i = 0; i < 200; ++i) {
    TelemetryRecord r;
    r.timestamp = i * 0.5;
    for (auto& v : r.values) v = rng.normal(1.0, 1e-3) * std::pow(10.0, rng.normal(0.0, 3.0));
    r.label = static_cast<Label>(i % 2);
    recs.push_back(r);
  }
  recs[7].values[1] = std::numeric_limits<double>::quiet_NaN();
  recs[9].values[0] = 0.0;
  recs[11].values[3] = 5e-324;
  const TelemetrySeries s(recs);
  const auto back = parse_csv_text(write_csv_text(s));
  CHECK(back.identical_to(s));
  CHECK(write_csv_text(back) == write_csv_text(s));
  CHECK(write_csv_text(s).find(",nan,") != std::string::npos);
}

TEST_CASE("sidecar round trip") {
  RunMetadata m{1209.0, 6960.0, 7211.0, Origin::Simulated};
  const auto back = parse_sidecar(write_sidecar(m));
  CHECK(back.rate_gy_per_h == 1209.0);
  CHECK(back.dut_stop_s == 6960.0);
  CHECK(back.monitor_stop_s == 7211.0);
  CHECK(back.origin == Origin::Simulated);
  RunMetadata open{5.0, std::nullopt, std::nullopt, Origin::Measured};
  const auto b2 = parse_sidecar(write_sidecar(open));
  CHECK_FALSE(b2.dut_stop_s);
  CHECK_FALSE(b2.monitor_stop_s);
}

TEST_CASE("board run validation") {
  BoardRun run;
  run.meta.rate_gy_per_h = 1.0;
  run.meta.dut_stop_s = 10.0;
  run.meta.monitor_stop_s = 5.0;
  CHECK(error_code([&] { run.validate(); }) == ErrorCode::InvalidArgument);
  run.meta.monitor_stop_s = 10.0;
  CHECK_FALSE(error_code([&] { run.validate(); }));
}

TEST_CASE("trim_invalid") {
  auto base = testing::ramp_series(10);
  std::vector<TelemetryRecord> recs = base.records();
  recs[4].values[index_of(ChannelId::TFpga)] = std::numeric_limits<double>::quiet_NaN();
  const TelemetrySeries s(recs);
  const auto t = trim_invalid(s);
  REQUIRE(t.size() == 9);
  CHECK(t[4].timestamp == 5.0);
  CHECK(trim_invalid(t).identical_to(t));
  CHECK(trim_invalid(base).identical_to(base));

  for (auto& r : recs) r.values[0] = 0.0;
  CHECK(trim_invalid(TelemetrySeries(recs)).empty());

  // Voltages out of range are the signal and stay.
  recs = base.records();
  recs[2].values[index_of(ChannelId::VAux)] = -3.0;
  recs[3].values[index_of(ChannelId::TPmic)] = std::numeric_limits<double>::infinity();
  CHECK(trim_invalid(TelemetrySeries(recs)).size() == 9);
}

TEST_CASE("annotate_tail") {
  const auto s = testing::ramp_series(1000);
  const auto a = annotate_tail(s, 300);
  const auto labels = a.labels();
  for (std::size_t i = 0; i < 1000; ++i) CHECK(labels[i] == (i >= 700 ? 1 : 0));
  const auto small = annotate_tail(testing::ramp_series(100), 300).labels();
  CHECK(std::count(small.begin(), small.end(), 1) == 100);
  const auto none = annotate_tail(s, 0).labels();
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
  for (std::size_t w : {1u, 17u, 999u, 1000u, 5000u}) {
    const auto l = annotate_tail(s, w).labels();
    CHECK(static_cast<std::size_t>(std::count(l.begin(), l.end(), 1)) == std::min<std::size_t>(w, 1000));
  }
}

TEST_CASE("take_head") {
  const auto s = testing::ramp_series(1000);
  CHECK(take_head(s).size() == 420);
  CHECK(take_head(s, 0).empty());
  CHECK(take_head(s, 5000).identical_to(s));
  CHECK(take_head(s, 3)[2].timestamp == 2.0);
}

TEST_CASE("to_features") {
  BoardRun run;
  run.series = annotate_tail(testing::ramp_series(50), 10);
  run.meta.rate_gy_per_h = 1209.0;
  const auto with_rate = to_features(run, true);
  CHECK(with_rate.cols() == 8);
  CHECK(with_rate.rows() == 50);
  for (std::size_t i = 0; i < 50; ++i) CHECK(with_rate(i, 7) == 1209.0);
  CHECK(with_rate.names().back() == "rate_gy_per_h");
  REQUIRE(with_rate.labels());
  CHECK((*with_rate.labels())[45] == 1);
  const auto sensors = to_features(run, false);
  CHECK(sensors.cols() == 7);
  CHECK(sensors.names()[0] == "t_pmic_c");
  CHECK(sensors(3, 2) == run.series[3].values[2]);
  BoardRun empty;
  const auto e = to_features(empty, FeatureSet::SensorsPlusRate);
  CHECK(e.rows() == 0);
  CHECK(e.cols() == 8);
}

TEST_CASE("standardize") {
  FeatureMatrix train(2, {"a", "b"});
  train.append_row(std::vector<double>{1.0, 5.0});
  train.append_row(std::vector<double>{3.0, 5.0});
  FeatureMatrix held(2, {"a", "b"});
  held.append_row(std::vector<double>{2.0, 5.0});
  const auto z = standardize(train, {held});
  CHECK(z.train(0, 0) == -1.0);
  CHECK(z.train(1, 0) == 1.0);
  CHECK(z.train(0, 1) == 0.0);
  CHECK(z.others[0](0, 0) == 0.0);
  CHECK(z.others[0](0, 1) == 0.0);

  FeatureMatrix one(2, {});
  one.append_row(std::vector<double>{1.0, 1.0});
  CHECK(error_code([&] { standardize(one); }) == ErrorCode::TooFewRows);

  Rng rng(5);
  auto m = testing::gaussian_matrix(rng, 300, 4, 7.0);
  const auto zs = standardize(m);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0, ss = 0;
    for (std::size_t i = 0; i < 300; ++i) mean += zs.train(i, j);
    mean /= 300;
    for (std::size_t i = 0; i < 300; ++i) ss += (zs.train(i, j) - mean) * (zs.train(i, j) - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(ss / 300) - 1.0) < 1e-9);
  }
}

TEST_CASE("feature matrix width checks") {
  FeatureMatrix m(3, {});
  CHECK(error_code([&] { m.append_row(std::vector<double>{1.0, 2.0}); }) == ErrorCode::DimensionMismatch);
  FeatureMatrix other(2, {});
  other.append_row(std::vector<double>{1.0, 2.0});
  m.append_row(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(error_code([&] { m.append(other); }) == ErrorCode::DimensionMismatch);
}
