#include "radwatch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "radwatch/error.hpp"

namespace radwatch {

// ---- Metrics ----------------------------------------------------------------

EvalReport precision_recall_f1(const LabelSeq& pred, const LabelSeq& truth) {
  if (pred.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "prediction and truth lengths differ");
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++r.tp;
    else if (p) ++r.fp;
    else if (t) ++r.fn;
    else ++r.tn;
  }
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.precision && r.recall && (*r.precision + *r.recall) > 0.0)
    r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  return r;
}

std::optional<double> detection_time(const LabelSeq& labels, const std::vector<double>& timestamps,
                                     const DetectionPolicy& policy) {
  if (labels.size() != timestamps.size())
    throw Error(ErrorCode::LengthMismatch, "label and timestamp lengths differ");
  if (policy.debounce_m < 1) throw Error(ErrorCode::InvalidArgument, "debounce_m must be at least 1");
  std::size_t run = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    run = labels[i] != 0 ? run + 1 : 0;
    if (run == policy.debounce_m) return timestamps[i + 1 - run];
  }
  return std::nullopt;
}

LeadTimeReport lead_time(const BoardRun& run, std::optional<double> detection, double start) {
  const auto& recs = run.series.records();
  if (recs.empty() || start < recs.front().timestamp || start > recs.back().timestamp)
    throw Error(ErrorCode::InvalidArgument, run.board_id + ": annotation start outside the run");
  LeadTimeReport r;
  r.board_id = run.board_id;
  r.annotation_start = start;
  r.detection_time = detection;
  if (!detection) return r;  // board not saved
  r.lead_vs_annotation = start - *detection;
  if (run.meta.dut_stop_s) r.lead_vs_death = *run.meta.dut_stop_s - *detection;
  r.saved = r.lead_vs_death && *r.lead_vs_death > 0.0;
  return r;
}

std::optional<double> annotation_start(const TelemetrySeries& annotated) {
  for (const auto& r : annotated.records())
    if (r.label && *r.label == 1) return r.timestamp;
  return std::nullopt;
}

MeanMetrics mean_metrics(const std::vector<EvalReport>& reports) {
  MeanMetrics m;
  m.boards = reports.size();
  auto average = [&](auto member, std::size_t& undefined) -> std::optional<double> {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : reports) {
      const std::optional<double>& v = r.*member;
      if (v) {
        sum += *v;
        ++count;
      } else {
        ++undefined;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  };
  m.precision = average(&EvalReport::precision, m.undefined_precision);
  m.recall = average(&EvalReport::recall, m.undefined_recall);
  m.f1 = average(&EvalReport::f1, m.undefined_f1);
  return m;
}

// ---- Training set -----------------------------------------------------------

namespace {

FeatureMatrix features_of(const TelemetrySeries& series, const RunMetadata& meta, FeatureSet fs) {
  BoardRun tmp;
  tmp.series = series;
  tmp.meta = meta;
  return to_features(tmp, fs);
}

FeatureMatrix slice_rows(const FeatureMatrix& m, std::size_t begin, std::size_t end) {
  FeatureMatrix out(m.cols(), m.names());
  end = std::min(end, m.rows());
  for (std::size_t i = begin; i < end; ++i)
    out.append_row(m.row(i), m.labels() ? std::optional<Label>((*m.labels())[i]) : std::nullopt);
  return out;
}

FeatureMatrix unlabeled(FeatureMatrix m) {
  m.drop_labels();
  return m;
}

}  // namespace

TrainingSet build_training_set(const std::vector<BoardRun>& runs, const TrainingOptions& options) {
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "no runs given");
  TrainingSet set;
  // Training rows are stacked in board-id order so the fitted model does not
  // depend on the order runs were listed in.
  std::vector<std::size_t> canon(runs.size());
  std::iota(canon.begin(), canon.end(), 0);
  std::stable_sort(canon.begin(), canon.end(),
                   [&](std::size_t a, std::size_t b) { return runs[a].board_id < runs[b].board_id; });
  std::vector<std::size_t> rank(runs.size());
  for (std::size_t r = 0; r < canon.size(); ++r) rank[canon[r]] = r;

  for (std::size_t b = 0; b < runs.size(); ++b) {
    const auto& run = runs[b];
    auto trimmed = trim_invalid(run.series);
    if (trimmed.empty()) throw Error(ErrorCode::EmptyAfterTrim, run.board_id + ": no valid records after trimming");
    std::size_t head = trimmed.size();
    if (options.head_n) {
      head = *options.head_n;
      if (!options.per_board_head) {
        const std::size_t share = *options.head_n / runs.size();
        head = share + (rank[b] < *options.head_n % runs.size() ? 1 : 0);
      }
    }
    // Labels never reach the training rows.
    set.heads.push_back(unlabeled(features_of(take_head(trimmed, head), run.meta, options.feature_set)));
    auto annotated = annotate_tail(trimmed, options.annotate_w);
    set.eval_sets.push_back(features_of(annotated, run.meta, options.feature_set));
    set.eval_series.push_back(std::move(annotated));
    set.board_ids.push_back(run.board_id);
  }
  set.train = FeatureMatrix(feature_width(options.feature_set), set.heads.front().names());
  for (std::size_t b : canon) set.train.append(set.heads[b]);
  return set;
}

// ---- Config -------------------------------------------------------------------

nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["detector"] = std::string(detector_name(c.detector));
  j["feature_set"] = std::string(feature_set_name(c.training.feature_set));
  j["standardize"] = c.standardize;
  j["seed"] = c.seed;
  j["head_n"] = c.training.head_n ? nlohmann::ordered_json(*c.training.head_n) : nullptr;
  j["per_board_head"] = c.training.per_board_head;
  j["annotate_w"] = c.training.annotate_w;
  j["debounce_m"] = c.policy.debounce_m;
  const auto& o = c.detectors.ocsvm;
  j["ocsvm"] = {{"nu", o.nu},
                {"gamma", o.gamma ? nlohmann::ordered_json(*o.gamma) : nullptr},
                {"gamma_rule", o.gamma_rule == GammaRule::Scale ? "scale" : "median"},
                {"tol", o.tol},
                {"max_iter", o.max_iter},
                {"cache_mb", o.cache_mb}};
  const auto& e = c.detectors.envelope;
  j["envelope"] = {{"contamination", e.contamination},
                   {"h", e.h ? nlohmann::ordered_json(*e.h) : nullptr},
                   {"random_starts", e.mcd.random_starts},
                   {"refine_best", e.mcd.refine_best},
                   {"exhaustive_limit", e.mcd.exhaustive_limit},
                   {"max_csteps", e.mcd.max_csteps}};
  j["lof"] = {{"k", c.detectors.lof.k}, {"threshold", c.detectors.lof.threshold}};
  j["control_chart"] = {{"k_sigma", c.detectors.chart.k_sigma}};
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::Format, "config must be a JSON object");
  try {
    if (j.contains("detector")) {
      const auto k = detector_from_name(j["detector"].get<std::string>());
      if (!k) throw Error(ErrorCode::BadHyperparameter, "unknown detector " + j["detector"].dump());
      c.detector = *k;
    }
    if (j.contains("feature_set")) {
      const auto fs = feature_set_from_name(j["feature_set"].get<std::string>());
      if (!fs) throw Error(ErrorCode::BadHyperparameter, "unknown feature set " + j["feature_set"].dump());
      c.training.feature_set = *fs;
    }
    c.standardize = j.value("standardize", c.standardize);
    c.seed = j.value("seed", c.seed);
    if (j.contains("head_n")) {
      if (j["head_n"].is_null() || j["head_n"] == "all") c.training.head_n.reset();
      else c.training.head_n = j["head_n"].get<std::size_t>();
    }
    c.training.per_board_head = j.value("per_board_head", c.training.per_board_head);
    c.training.annotate_w = j.value("annotate_w", c.training.annotate_w);
    c.policy.debounce_m = j.value("debounce_m", c.policy.debounce_m);
    if (j.contains("ocsvm")) {
      const auto& o = j["ocsvm"];
      auto& p = c.detectors.ocsvm;
      p.nu = o.value("nu", p.nu);
      if (o.contains("gamma")) {
        if (o["gamma"].is_null()) p.gamma.reset();
        else p.gamma = o["gamma"].get<double>();
      }
      if (o.contains("gamma_rule")) {
        const auto rule = o["gamma_rule"].get<std::string>();
        if (rule == "scale") p.gamma_rule = GammaRule::Scale;
        else if (rule == "median") p.gamma_rule = GammaRule::Median;
        else throw Error(ErrorCode::BadHyperparameter, "gamma_rule must be scale or median");
      }
      p.tol = o.value("tol", p.tol);
      p.max_iter = o.value("max_iter", p.max_iter);
      p.cache_mb = o.value("cache_mb", p.cache_mb);
    }
    if (j.contains("envelope")) {
      const auto& e = j["envelope"];
      auto& p = c.detectors.envelope;
      p.contamination = e.value("contamination", p.contamination);
      if (e.contains("h")) {
        if (e["h"].is_null()) p.h.reset();
        else p.h = e["h"].get<std::size_t>();
      }
      p.mcd.random_starts = e.value("random_starts", p.mcd.random_starts);
      p.mcd.refine_best = e.value("refine_best", p.mcd.refine_best);
      p.mcd.exhaustive_limit = e.value("exhaustive_limit", p.mcd.exhaustive_limit);
      p.mcd.max_csteps = e.value("max_csteps", p.mcd.max_csteps);
    }
    if (j.contains("lof")) {
      c.detectors.lof.k = j["lof"].value("k", c.detectors.lof.k);
      c.detectors.lof.threshold = j["lof"].value("threshold", c.detectors.lof.threshold);
    }
    if (j.contains("control_chart"))
      c.detectors.chart.k_sigma = j["control_chart"].value("k_sigma", c.detectors.chart.k_sigma);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("config: ") + e.what());
  }
  const auto& o = c.detectors.ocsvm;
  if (!(o.nu > 0.0 && o.nu <= 1.0)) throw Error(ErrorCode::BadHyperparameter, "ocsvm.nu must lie in (0, 1]");
  if (o.gamma && !(*o.gamma > 0.0)) throw Error(ErrorCode::BadHyperparameter, "ocsvm.gamma must be positive");
  if (!(o.tol > 0.0) || o.max_iter == 0) throw Error(ErrorCode::BadHyperparameter, "ocsvm tol/max_iter must be positive");
  const double cont = c.detectors.envelope.contamination;
  if (!(cont > 0.0 && cont < 0.5)) throw Error(ErrorCode::BadHyperparameter, "envelope.contamination must lie in (0, 0.5)");
  if (c.detectors.lof.k < 1 || !(c.detectors.lof.threshold > 0.0))
    throw Error(ErrorCode::BadHyperparameter, "lof.k must be >= 1 and lof.threshold > 0");
  if (!(c.detectors.chart.k_sigma > 0.0)) throw Error(ErrorCode::BadHyperparameter, "control_chart.k_sigma must be positive");
  if (c.policy.debounce_m < 1) throw Error(ErrorCode::BadHyperparameter, "debounce_m must be >= 1");
  if (c.training.head_n && *c.training.head_n == 0) throw Error(ErrorCode::BadHyperparameter, "head_n must be positive");
  return c;
}

// ---- Pipeline -----------------------------------------------------------------

BoardResult score_board(const ModelBundle& bundle, const BoardRun& run, const TelemetrySeries& annotated,
                        const FeatureMatrix& features, const DetectionPolicy& policy) {
  const FeatureMatrix scaled = bundle.scaler ? apply_scaler(*bundle.scaler, features) : features;
  BoardResult out;
  out.scores = score_rows(bundle.model, scaled);
  out.predictions = labels_from_scores(bundle.model, scaled, out.scores);
  out.eval = precision_recall_f1(out.predictions, annotated.labels());
  out.eval.board_id = run.board_id;
  out.eval.model_kind = std::string(detector_name(kind_of(bundle.model)));
  const auto timestamps = annotated.timestamps();
  const auto detection = detection_time(out.predictions, timestamps, policy);
  const auto start = annotation_start(annotated);
  out.lead = lead_time(run, detection, start.value_or(timestamps.empty() ? 0.0 : timestamps.back()));
  return out;
}

namespace {

PipelineConfig with_seed(PipelineConfig c) {
  c.detectors.envelope.mcd.seed = c.seed;
  return c;
}

}  // namespace

PipelineResult evaluate_on(const std::vector<BoardRun>& runs, const TrainingSet& set,
                           const FeatureMatrix& train, const PipelineConfig& config_in) {
  const PipelineConfig config = with_seed(config_in);
  PipelineResult result;
  result.config = config_in;
  result.model.feature_names = train.names();
  FeatureMatrix fit_rows = train;
  if (config.standardize) {
    result.model.scaler = fit_scaler(train);
    fit_rows = apply_scaler(*result.model.scaler, train);
  }
  result.model.model = train_detector(config.detector, fit_rows, config.detectors);
  std::vector<EvalReport> evals;
  for (std::size_t b = 0; b < set.eval_sets.size(); ++b) {
    try {
      result.boards.push_back(
          score_board(result.model, runs[b], set.eval_series[b], set.eval_sets[b], config.policy));
    } catch (const Error& e) {
      throw e.in_context(set.board_ids[b]);
    }
    evals.push_back(result.boards.back().eval);
  }
  result.mean = mean_metrics(evals);
  return result;
}

PipelineResult run_pipeline(const std::vector<BoardRun>& runs, const PipelineConfig& config) {
  const auto set = build_training_set(runs, config.training);
  return evaluate_on(runs, set, set.train, config);
}

// ---- Strategies ----------------------------------------------------------------

std::string_view strategy_name(SweepStrategy s) {
  switch (s) {
    case SweepStrategy::PerBoard: return "per_board";
    case SweepStrategy::BoardSubsets: return "board_subsets";
    case SweepStrategy::HeadLengths: return "head_lengths";
  }
  return "unknown";
}

std::optional<SweepStrategy> strategy_from_name(std::string_view name) {
  for (auto s : {SweepStrategy::PerBoard, SweepStrategy::BoardSubsets, SweepStrategy::HeadLengths})
    if (strategy_name(s) == name) return s;
  return std::nullopt;
}

namespace {

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::string head_text(std::optional<std::size_t> h) { return h ? std::to_string(*h) : "all"; }

std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k == 0 || k > n) return out;
  std::vector<std::size_t> c(k);
  std::iota(c.begin(), c.end(), 0);
  while (true) {
    out.push_back(c);
    std::size_t pos = k;
    while (pos > 0 && c[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++c[pos - 1];
    for (std::size_t q = pos; q < k; ++q) c[q] = c[q - 1] + 1;
  }
  return out;
}

std::vector<EvalReport> evals_of(const PipelineResult& r) {
  std::vector<EvalReport> out;
  for (const auto& b : r.boards) out.push_back(b.eval);
  return out;
}

// Ranking where an undefined F1 sorts below every defined one.
bool better_f1(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a) return false;
  if (!b) return true;
  return *a > *b;
}

SweepSummaryRow summarize(std::string group, const std::vector<const SweepCell*>& cells) {
  SweepSummaryRow row;
  row.group = std::move(group);
  const SweepCell* best = nullptr;
  const SweepCell* worst = nullptr;
  double sum = 0.0;
  std::size_t count = 0;
  for (const SweepCell* c : cells) {
    if (!best || better_f1(c->mean.f1, best->mean.f1)) best = c;
    if (!worst || better_f1(worst->mean.f1, c->mean.f1)) worst = c;
    if (c->mean.f1) {
      sum += *c->mean.f1;
      ++count;
    }
  }
  if (best) {
    row.best_key = best->key;
    row.best_f1 = best->mean.f1;
  }
  if (worst) {
    row.worst_key = worst->key;
    row.worst_f1 = worst->mean.f1;
  }
  if (count > 0) row.mean_f1 = sum / static_cast<double>(count);
  return row;
}

}  // namespace

std::size_t expected_cell_count(const SweepConfig& cfg, std::size_t n_boards) {
  const std::size_t fs = cfg.feature_sets.size();
  switch (cfg.strategy) {
    case SweepStrategy::PerBoard: return n_boards * fs;
    case SweepStrategy::BoardSubsets: {
      std::size_t total = 0;
      for (std::size_t s : cfg.subset_sizes) total += binomial(n_boards, s);
      return total * fs;
    }
    case SweepStrategy::HeadLengths: return cfg.head_lengths.size() * fs;
  }
  return 0;
}

SweepReport run_sweep(const SweepConfig& cfg, const std::vector<BoardRun>& runs) {
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one run");
  if (cfg.feature_sets.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one feature set");
  SweepReport report;
  report.config = cfg;
  const std::string kind(detector_name(cfg.base.detector));

  for (FeatureSet fs : cfg.feature_sets) {
    const std::string fs_tag = "|fs=" + std::string(feature_set_name(fs));
    PipelineConfig base = cfg.base;
    base.training.feature_set = fs;

    switch (cfg.strategy) {
      case SweepStrategy::PerBoard: {
        const auto set = build_training_set(runs, base.training);
        for (std::size_t b = 0; b < runs.size(); ++b) {
          // Train on this board's head, test on the rest of the same board.
          const std::size_t head = set.heads[b].rows();
          TrainingSet single;
          single.train = set.heads[b];
          single.eval_sets = {slice_rows(set.eval_sets[b], head, set.eval_sets[b].rows())};
          SweepCell cell;
          cell.key = "board=" + runs[b].board_id + "|head=" + head_text(base.training.head_n) + fs_tag;
          cell.train_boards = {b};
          cell.head_n = base.training.head_n;
          cell.feature_set = fs;
          PipelineConfig c = with_seed(base);
          FeatureMatrix fit_rows = single.train;
          std::optional<Scaler> scaler;
          if (c.standardize) {
            scaler = fit_scaler(single.train);
            fit_rows = apply_scaler(*scaler, single.train);
          }
          const auto model = train_detector(c.detector, fit_rows, c.detectors);
          FeatureMatrix test = single.eval_sets[0];
          if (scaler) test = apply_scaler(*scaler, test);
          auto ev = precision_recall_f1(predict_labels(model, test),
                                        test.labels().value_or(LabelSeq{}));
          ev.board_id = runs[b].board_id;
          ev.model_kind = kind;
          cell.reports = {ev};
          cell.mean = mean_metrics(cell.reports);
          report.cells.push_back(std::move(cell));
        }
        break;
      }
      case SweepStrategy::BoardSubsets: {
        const auto set = build_training_set(runs, base.training);
        for (std::size_t size : cfg.subset_sizes) {
          for (const auto& subset : combinations(runs.size(), size)) {
            FeatureMatrix train;
            std::string key = "boards=";
            for (std::size_t q = 0; q < subset.size(); ++q) {
              train.append(set.heads[subset[q]]);
              key += (q ? "," : "") + std::to_string(subset[q]);
            }
            SweepCell cell;
            cell.key = key + fs_tag;
            cell.train_boards = subset;
            cell.head_n = base.training.head_n;
            cell.feature_set = fs;
            const auto result = evaluate_on(runs, set, train, base);
            cell.reports = evals_of(result);
            cell.mean = result.mean;
            report.cells.push_back(std::move(cell));
          }
        }
        break;
      }
      case SweepStrategy::HeadLengths: {
        for (const auto& h : cfg.head_lengths) {
          PipelineConfig c = base;
          c.training.head_n = h;
          const auto result = run_pipeline(runs, c);
          SweepCell cell;
          cell.key = "head=" + head_text(h) + fs_tag;
          cell.train_boards.resize(runs.size());
          std::iota(cell.train_boards.begin(), cell.train_boards.end(), 0);
          cell.head_n = h;
          cell.feature_set = fs;
          cell.reports = evals_of(result);
          cell.mean = result.mean;
          report.cells.push_back(std::move(cell));
        }
        break;
      }
    }
  }

  // Summary rows in cell order.
  if (cfg.strategy == SweepStrategy::BoardSubsets) {
    for (FeatureSet fs : cfg.feature_sets)
      for (std::size_t size : cfg.subset_sizes) {
        std::vector<const SweepCell*> group;
        for (const auto& c : report.cells)
          if (c.feature_set == fs && c.train_boards.size() == size) group.push_back(&c);
        if (group.empty()) continue;
        report.summary.push_back(
            summarize("size=" + std::to_string(size) + "|fs=" + std::string(feature_set_name(fs)), group));
      }
  } else {
    for (const auto& c : report.cells) report.summary.push_back(summarize(c.key, {&c}));
  }
  return report;
}

ComparisonReport compare_models(const std::vector<BoardRun>& runs, const PipelineConfig& base,
                                const std::vector<DetectorKind>& kinds) {
  const auto set = build_training_set(runs, base.training);
  ComparisonReport report;
  report.config = base;
  for (DetectorKind kind : kinds) {
    PipelineConfig c = base;
    c.detector = kind;
    const auto result = evaluate_on(runs, set, set.train, c);
    ModelComparison mc{kind, {}, {}, result.mean};
    for (const auto& b : result.boards) {
      mc.reports.push_back(b.eval);
      mc.leads.push_back(b.lead);
    }
    report.models.push_back(std::move(mc));
  }
  return report;
}

// ---- Report output ----------------------------------------------------------------

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& r) {
  return {{"board_id", r.board_id}, {"model_kind", r.model_kind}, {"tp", r.tp},
          {"fp", r.fp},             {"tn", r.tn},                 {"fn", r.fn},
          {"precision", opt(r.precision)}, {"recall", opt(r.recall)}, {"f1", opt(r.f1)}};
}

nlohmann::ordered_json to_json(const LeadTimeReport& r) {
  return {{"board_id", r.board_id},
          {"detection_time", opt(r.detection_time)},
          {"annotation_start", r.annotation_start},
          {"lead_vs_annotation", opt(r.lead_vs_annotation)},
          {"lead_vs_death", opt(r.lead_vs_death)},
          {"saved", r.saved}};
}

nlohmann::ordered_json to_json(const MeanMetrics& m) {
  return {{"boards", m.boards},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)},
          {"undefined_precision", m.undefined_precision},
          {"undefined_recall", m.undefined_recall},
          {"undefined_f1", m.undefined_f1}};
}

nlohmann::ordered_json to_json(const PipelineResult& r) {
  nlohmann::ordered_json j;
  j["config"] = config_to_json(r.config);
  j["feature_set"] = std::string(feature_set_name(r.config.training.feature_set));
  j["model_kind"] = std::string(detector_name(kind_of(r.model.model)));
  nlohmann::ordered_json evals = nlohmann::ordered_json::array();
  nlohmann::ordered_json leads = nlohmann::ordered_json::array();
  for (const auto& b : r.boards) {
    evals.push_back(to_json(b.eval));
    leads.push_back(to_json(b.lead));
  }
  j["evaluations"] = std::move(evals);
  j["lead_times"] = std::move(leads);
  j["mean"] = to_json(r.mean);
  return j;
}

nlohmann::ordered_json to_json(const SweepReport& r) {
  nlohmann::ordered_json j;
  j["config"] = config_to_json(r.config.base);
  j["strategy"] = std::string(strategy_name(r.config.strategy));
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : r.cells) {
    nlohmann::ordered_json cj;
    cj["key"] = c.key;
    cj["train_boards"] = c.train_boards;
    cj["head_n"] = c.head_n ? nlohmann::ordered_json(*c.head_n) : nullptr;
    cj["feature_set"] = std::string(feature_set_name(c.feature_set));
    nlohmann::ordered_json reps = nlohmann::ordered_json::array();
    for (const auto& e : c.reports) reps.push_back(to_json(e));
    cj["reports"] = std::move(reps);
    cj["mean"] = to_json(c.mean);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const auto& s : r.summary)
    summary.push_back({{"group", s.group},
                       {"best_key", s.best_key},
                       {"best_f1", opt(s.best_f1)},
                       {"worst_key", s.worst_key},
                       {"worst_f1", opt(s.worst_f1)},
                       {"mean_f1", opt(s.mean_f1)}});
  j["summary"] = std::move(summary);
  return j;
}

nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["config"] = config_to_json(r.config);
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& m : r.models) {
    nlohmann::ordered_json mj;
    mj["model_kind"] = std::string(detector_name(m.kind));
    nlohmann::ordered_json reps = nlohmann::ordered_json::array();
    for (const auto& e : m.reports) reps.push_back(to_json(e));
    mj["reports"] = std::move(reps);
    nlohmann::ordered_json leads = nlohmann::ordered_json::array();
    for (const auto& l : m.leads) leads.push_back(to_json(l));
    mj["lead_times"] = std::move(leads);
    mj["mean"] = to_json(m.mean);
    models.push_back(std::move(mj));
  }
  j["models"] = std::move(models);
  return j;
}

void write_eval_csv(const std::vector<EvalReport>& reports, std::ostream& out) {
  auto cell = [](const std::optional<double>& v) { return v ? format_decimal(*v) : std::string(); };
  out << "board_id,model_kind,tp,fp,tn,fn,precision,recall,f1\n";
  for (const auto& r : reports)
    out << r.board_id << ',' << r.model_kind << ',' << r.tp << ',' << r.fp << ',' << r.tn << ',' << r.fn
        << ',' << cell(r.precision) << ',' << cell(r.recall) << ',' << cell(r.f1) << '\n';
}

void write_plot_data(const TrainingSet& set, const PipelineResult& result, std::ostream& out) {
  out << "board_id,time_s,track,series,value\n";
  for (std::size_t b = 0; b < set.eval_series.size() && b < result.boards.size(); ++b) {
    const auto& series = set.eval_series[b];
    const auto& pred = result.boards[b].predictions;
    const std::string& id = set.board_ids[b];
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& rec = series[i];
      const std::string t = format_decimal(rec.timestamp);
      for (ChannelId c : kAllChannels) {
        out << id << ',' << t << ',' << (is_temperature(c) ? "temperature" : "voltage") << ','
            << channel_name(c) << ',' << format_decimal(rec.values[index_of(c)]) << '\n';
      }
      out << id << ',' << t << ",annotation,label," << static_cast<int>(rec.label.value_or(0)) << '\n';
      out << id << ',' << t << ",model," << detector_name(kind_of(result.model.model)) << ','
          << static_cast<int>(pred[i]) << '\n';
    }
  }
}

}  // namespace radwatch
