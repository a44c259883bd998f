#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "radwatch/harness.hpp"
#include "radwatch/simulator.hpp"
#include "support.hpp"

using namespace radwatch;
using testing::error_code;

namespace {

const std::vector<BoardRun>& suite_runs() {
  static const std::vector<BoardRun> runs = [] {
    std::vector<BoardRun> out;
    for (const auto& s : sim::default_suite().scenarios) out.push_back(sim::simulate_run(s));
    return out;
  }();
  return runs;
}

}  // namespace

TEST_CASE("worked example: 10 anomalies, 8 flagged, 5 correct") {
  LabelSeq truth(40, 0), pred(40, 0);
  for (int i = 0; i < 10; ++i) truth[i] = 1;
  for (int i = 0; i < 5; ++i) pred[i] = 1;
  for (int i = 20; i < 23; ++i) pred[i] = 1;
  const auto r = precision_recall_f1(pred, truth);
  CHECK(*r.precision == 0.625);
  CHECK(*r.recall == 0.5);
  CHECK(*r.f1 == doctest::Approx(2 * 0.625 * 0.5 / 1.125));
  CHECK(r.tp == 5);
  CHECK(r.fp == 3);
  CHECK(r.fn == 5);
  CHECK(r.tn == 27);
}

TEST_CASE("undefined metrics stay undefined") {
  const LabelSeq zeros(5, 0);
  const auto r = precision_recall_f1(zeros, zeros);
  CHECK_FALSE(r.precision);
  CHECK_FALSE(r.recall);
  CHECK_FALSE(r.f1);
  const LabelSeq some = {1, 0, 0, 0, 0};
  const auto r2 = precision_recall_f1(some, zeros);
  CHECK(*r2.precision == 0.0);
  CHECK_FALSE(r2.recall);
  CHECK(error_code([] { precision_recall_f1({1}, {1, 0}); }) == ErrorCode::LengthMismatch);
  const auto m = mean_metrics({r, r2, precision_recall_f1(some, some)});
  CHECK(m.boards == 3);
  CHECK(*m.precision == 0.5);
  CHECK(m.undefined_precision == 1);
  CHECK(m.undefined_recall == 2);
  CHECK(*m.recall == 1.0);
}

TEST_CASE("f1 bounds") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    LabelSeq p(30), y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      p[i] = rng.uniform() < 0.4;
      y[i] = rng.uniform() < 0.4;
    }
    const auto r = precision_recall_f1(p, y);
    if (!r.f1) continue;
    CHECK(*r.f1 <= std::min(2 * *r.precision, 2 * *r.recall) + 1e-15);
    CHECK(*r.f1 >= std::min(*r.precision, *r.recall) - 1e-15);
    CHECK(*r.f1 <= std::max(*r.precision, *r.recall) + 1e-15);
  }
}

TEST_CASE("debounced detection") {
  const LabelSeq labels = {0, 1, 0, 1, 1, 0, 1, 1, 1, 1};
  std::vector<double> t(labels.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 10.0 * i;
  CHECK(detection_time(labels, t, {1}) == 10.0);
  CHECK(detection_time(labels, t, {2}) == 30.0);
  CHECK(detection_time(labels, t, {3}) == 60.0);
  CHECK(detection_time(labels, t, {4}) == 60.0);
  CHECK_FALSE(detection_time(labels, t, {5}));
  CHECK(error_code([&] { detection_time(labels, t, {0}); }) == ErrorCode::InvalidArgument);
  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    LabelSeq l(60);
    for (auto& x : l) x = rng.uniform() < 0.6;
    std::vector<double> ts(60);
    for (std::size_t i = 0; i < 60; ++i) ts[i] = i;
    double prev = -1.0;
    for (std::size_t m = 1; m < 8; ++m) {
      const auto d = detection_time(l, ts, {m});
      const double v = d.value_or(1e9);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("lead times") {
  BoardRun run;
  run.board_id = "b";
  run.series = testing::ramp_series(100);
  run.meta.dut_stop_s = 90.0;
  const auto early = lead_time(run, 50.0, 70.0);
  CHECK(*early.lead_vs_annotation == 20.0);
  CHECK(*early.lead_vs_death == 40.0);
  CHECK(early.saved);
  const auto late = lead_time(run, 82.0, 70.0);
  CHECK(*late.lead_vs_annotation == -12.0);
  CHECK(late.saved);
  const auto missed = lead_time(run, std::nullopt, 70.0);
  CHECK_FALSE(missed.saved);
  CHECK_FALSE(missed.lead_vs_death);
  const auto after = lead_time(run, 95.0, 70.0);
  CHECK_FALSE(after.saved);
  CHECK(error_code([&] { lead_time(run, 1.0, 500.0); }) == ErrorCode::InvalidArgument);
  CHECK(annotation_start(annotate_tail(run.series, 30)) == 70.0);
}

TEST_CASE("training set construction") {
  const auto& runs = suite_runs();
  const auto set = build_training_set(runs);
  CHECK_FALSE(set.train.labels());
  CHECK(set.train.rows() == 6 * 420);
  CHECK(set.heads.size() == 6);
  CHECK(set.eval_sets.size() == 6);
  for (std::size_t b = 0; b < 6; ++b) {
    REQUIRE(set.eval_sets[b].labels());
    const auto& l = *set.eval_sets[b].labels();
    CHECK(std::count(l.begin(), l.end(), 1) == 300);
    CHECK(set.eval_series[b].size() == trim_invalid(runs[b].series).size());
  }
  TrainingOptions total;
  total.per_board_head = false;
  total.head_n = 421;
  const auto shared = build_training_set(runs, total);
  CHECK(shared.train.rows() == 421);
  CHECK(shared.heads[0].rows() == 71);
  CHECK(shared.heads[5].rows() == 70);
  TrainingOptions rate;
  rate.feature_set = FeatureSet::SensorsPlusRate;
  CHECK(build_training_set(runs, rate).train.cols() == 8);

  BoardRun dead = runs[0];
  std::vector<TelemetryRecord> recs = dead.series.records();
  for (auto& r : recs) r.values[0] = 0.0;
  dead.series = TelemetrySeries(recs);
  CHECK(error_code([&] { build_training_set({dead}); }) == ErrorCode::EmptyAfterTrim);
  CHECK(error_code([] { build_training_set({}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("pipeline is deterministic and board order only permutes reports") {
  const auto& runs = suite_runs();
  PipelineConfig cfg;
  const auto a = run_pipeline(runs, cfg);
  const auto b = run_pipeline(runs, cfg);
  CHECK(to_json(a).dump() == to_json(b).dump());
  std::vector<BoardRun> reversed(runs.rbegin(), runs.rend());
  const auto r = run_pipeline(reversed, cfg);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& x = a.boards[i].eval;
    const auto& y = r.boards[runs.size() - 1 - i].eval;
    CHECK(x.board_id == y.board_id);
    CHECK(x.tp == y.tp);
    CHECK(x.fp == y.fp);
    CHECK(x.fn == y.fn);
  }
}

TEST_CASE("sweep cell counts and determinism") {
  const auto& runs = suite_runs();
  SweepConfig subsets;
  subsets.strategy = SweepStrategy::BoardSubsets;
  subsets.base.detector = DetectorKind::ControlChart;
  CHECK(expected_cell_count(subsets, 6) == 57);
  const auto rep = run_sweep(subsets, runs);
  CHECK(rep.cells.size() == 57);
  CHECK(rep.summary.size() == 5);
  CHECK(rep.cells.front().key == "boards=0,1|fs=sensors");
  CHECK(rep.cells.back().key == "boards=0,1,2,3,4,5|fs=sensors");
  CHECK(to_json(rep).dump() == to_json(run_sweep(subsets, runs)).dump());

  SweepConfig heads;
  heads.base.detector = DetectorKind::ControlChart;
  heads.feature_sets = {FeatureSet::Sensors, FeatureSet::SensorsPlusRate};
  CHECK(expected_cell_count(heads, 6) == 12);
  const auto hr = run_sweep(heads, runs);
  CHECK(hr.cells.size() == 12);
  CHECK(std::any_of(hr.cells.begin(), hr.cells.end(), [](const SweepCell& c) { return c.key == "head=420|fs=sensors"; }));

  SweepConfig per;
  per.strategy = SweepStrategy::PerBoard;
  per.base.detector = DetectorKind::ControlChart;
  CHECK(expected_cell_count(per, 6) == 6);
  CHECK(run_sweep(per, runs).cells.size() == 6);
}

TEST_CASE("model comparison shape") {
  const auto& runs = suite_runs();
  const auto cmp = compare_models(runs, PipelineConfig{});
  REQUIRE(cmp.models.size() == 4);
  for (const auto& m : cmp.models) CHECK(m.reports.size() == runs.size());
}

TEST_CASE("config json round trip and validation") {
  PipelineConfig c;
  c.detector = DetectorKind::Lof;
  c.detectors.lof.k = 7;
  c.detectors.ocsvm.gamma = 0.3;
  c.training.head_n.reset();
  c.training.feature_set = FeatureSet::SensorsPlusRate;
  c.seed = 5;
  const auto j = config_to_json(c);
  const auto back = config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(config_to_json(back).dump() == j.dump());
  CHECK(error_code([] { config_from_json(nlohmann::json::parse(R"({"detector":"tree"})")); }) ==
        ErrorCode::BadHyperparameter);
  CHECK(error_code([] { config_from_json(nlohmann::json::parse(R"({"ocsvm":{"nu":2}})")); }) ==
        ErrorCode::BadHyperparameter);
  CHECK(error_code([] { config_from_json(nlohmann::json::parse(R"({"lof":{"k":"x"}})")); }) == ErrorCode::Format);
  CHECK(error_code([] { config_from_json(nlohmann::json::parse("[1]")); }) == ErrorCode::Format);
}

TEST_CASE("csv and plot exports") {
  const auto& runs = suite_runs();
  PipelineConfig cfg;
  cfg.detector = DetectorKind::ControlChart;
  const auto set = build_training_set(runs, cfg.training);
  const auto res = evaluate_on(runs, set, set.train, cfg);
  std::ostringstream csv;
  std::vector<EvalReport> evals;
  for (const auto& b : res.boards) evals.push_back(b.eval);
  write_eval_csv(evals, csv);
  const std::string rows = csv.str();
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 7);
  std::ostringstream plot;
  write_plot_data(set, res, plot);
  const std::string text = plot.str();
  CHECK(text.rfind("board_id,time_s,track,series,value\n", 0) == 0);
  std::size_t samples = 0;
  for (const auto& s : set.eval_series) samples += s.size();
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == 1 + samples * 9);
  CHECK(text.find(",annotation,label,1\n") != std::string::npos);
  CHECK(text.find(",model,control_chart,") != std::string::npos);
}
