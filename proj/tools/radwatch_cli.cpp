// radwatch: command-line front end for simulation, training, scoring and
// evaluation of board telemetry.
//
// Exit status: 0 success, 1 data/pipeline error, 2 usage or config error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "radwatch/error.hpp"
#include "radwatch/harness.hpp"
#include "radwatch/manifest.hpp"
#include "radwatch/model_io.hpp"
#include "radwatch/simulator.hpp"
#include "radwatch/stats.hpp"

namespace fs = std::filesystem;
using namespace radwatch;

namespace {

constexpr const char* kOutEnv = "RADWATCH_OUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the pipeline subcommands. Unset flags leave the config
// file (or the defaults) alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> detector;
  std::optional<std::string> feature_set;
  std::optional<std::string> head_n;
  std::optional<std::size_t> annotate_w;
  std::optional<std::size_t> debounce;
  std::optional<std::uint64_t> seed;
  std::optional<double> nu;
  std::optional<double> gamma;
  std::optional<std::string> gamma_rule;
  std::optional<std::size_t> lof_k;
  std::optional<double> lof_threshold;
  std::optional<double> contamination;
  std::optional<double> k_sigma;
  bool no_standardize = false;
  bool total_head = false;
};

void add_config_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON config file (flags take precedence)");
  app->add_option("--detector", o.detector, "ocsvm | envelope | lof | control_chart");
  app->add_option("--feature-set", o.feature_set, "sensors | sensors_plus_rate");
  app->add_option("--head-n", o.head_n, "training points per board, or 'all'");
  app->add_option("--annotate-w", o.annotate_w, "points labeled anomalous at the end of each run");
  app->add_option("--debounce", o.debounce, "consecutive anomaly labels for a detection");
  app->add_option("--seed", o.seed, "seed for randomized steps");
  app->add_option("--nu", o.nu, "OCSVM nu");
  app->add_option("--gamma", o.gamma, "OCSVM RBF gamma (default: scale rule)");
  app->add_option("--gamma-rule", o.gamma_rule, "scale | median");
  app->add_option("--lof-k", o.lof_k, "LOF neighbours");
  app->add_option("--lof-threshold", o.lof_threshold, "LOF anomaly cutoff");
  app->add_option("--contamination", o.contamination, "envelope contamination");
  app->add_option("--k-sigma", o.k_sigma, "control chart limit multiplier");
  app->add_flag("--no-standardize", o.no_standardize, "train on raw features");
  app->add_flag("--total-head", o.total_head, "head-n counts points over all boards, not per board");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

PipelineConfig resolve_config(const Overrides& o) {
  PipelineConfig c;
  try {
    if (!o.config_path.empty()) c = config_from_json(parse_json_file(o.config_path));
    nlohmann::json j = nlohmann::json::object();
    if (o.detector) j["detector"] = *o.detector;
    if (o.feature_set) j["feature_set"] = *o.feature_set;
    if (o.head_n) {
      if (*o.head_n == "all") j["head_n"] = nullptr;
      else j["head_n"] = std::stoull(*o.head_n);
    }
    if (o.annotate_w) j["annotate_w"] = *o.annotate_w;
    if (o.debounce) j["debounce_m"] = *o.debounce;
    if (o.seed) j["seed"] = *o.seed;
    if (o.no_standardize) j["standardize"] = false;
    if (o.total_head) j["per_board_head"] = false;
    if (o.nu) j["ocsvm"]["nu"] = *o.nu;
    if (o.gamma) j["ocsvm"]["gamma"] = *o.gamma;
    if (o.gamma_rule) j["ocsvm"]["gamma_rule"] = *o.gamma_rule;
    if (o.lof_k) j["lof"]["k"] = *o.lof_k;
    if (o.lof_threshold) j["lof"]["threshold"] = *o.lof_threshold;
    if (o.contamination) j["envelope"]["contamination"] = *o.contamination;
    if (o.k_sigma) j["control_chart"]["k_sigma"] = *o.k_sigma;
    return config_from_json(j, c);
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw UsageError("--head-n must be a count or 'all'");
  }
}

std::string default_out_dir() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? env : ".";
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot use output directory " + dir);
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::ordered_json tool_config(const PipelineConfig& c, const std::string& out_dir) {
  auto j = config_to_json(c);
  j["output_dir"] = out_dir;
  return j;
}

std::vector<BoardRun> runs_from(const std::string& manifest_path, RunManifest* manifest = nullptr) {
  if (manifest_path.empty()) throw UsageError("--manifest is required");
  RunManifest m;
  try {
    m = load_manifest(manifest_path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (m.boards.empty()) throw UsageError("manifest lists no boards");
  if (manifest) *manifest = m;
  return load_runs(m);
}

// ---- subcommands ------------------------------------------------------------

struct SimulateArgs {
  std::string suite_path;
  std::uint64_t seed = sim::kDefaultSuiteSeed;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  sim::ScenarioSuite suite;
  if (a.suite_path.empty()) {
    suite = sim::default_suite(a.seed);
  } else {
    try {
      suite = sim::suite_from_json(parse_json_file(a.suite_path));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  const fs::path dir = prepare_out_dir(a.out);
  RunManifest manifest;
  manifest.dataset = a.suite_path.empty() ? "simulated/seed-" + std::to_string(a.seed) : "simulated/custom";
  for (const auto& s : suite.scenarios) {
    BoardRun run;
    try {
      run = sim::simulate_run(s);
    } catch (const Error& e) {
      throw e.in_context(s.name);
    }
    const std::string csv = s.name + ".csv", meta = s.name + ".json";
    save_run(run, (dir / csv).string(), (dir / meta).string());
    manifest.boards.push_back({s.name, csv, meta});
  }
  write_json(dir / "suite.json", sim::suite_to_json(suite));
  save_manifest(manifest, (dir / "manifest.json").string());
  std::cout << "wrote " << suite.scenarios.size() << " runs and manifest.json to " << dir.string() << "\n";
  return 0;
}

int cmd_trim(const std::string& manifest_path, const std::string& out) {
  RunManifest m;
  const auto runs = runs_from(manifest_path, &m);
  const fs::path dir = prepare_out_dir(out);
  RunManifest trimmed{m.dataset + "/trimmed", {}};
  for (const auto& run : runs) {
    BoardRun t = run;
    t.series = trim_invalid(run.series);
    const std::string csv = run.board_id + ".csv", meta = run.board_id + ".json";
    save_run(t, (dir / csv).string(), (dir / meta).string());
    trimmed.boards.push_back({run.board_id, csv, meta});
    std::cout << run.board_id << ": kept " << t.series.size() << " of " << run.series.size() << " records\n";
  }
  save_manifest(trimmed, (dir / "manifest.json").string());
  return 0;
}

int cmd_train(const std::string& manifest_path, const Overrides& o, const std::string& out) {
  const auto cfg = resolve_config(o);
  const auto runs = runs_from(manifest_path);
  const fs::path dir = prepare_out_dir(out);
  const auto result = run_pipeline(runs, cfg);
  auto j = model_to_json(result.model);
  j["tool_config"] = tool_config(cfg, out);
  write_json(dir / "model.json", j);
  if (const auto* svm = std::get_if<OcsvmModel>(&result.model.model); svm && !svm->converged)
    std::cerr << "warning: OCSVM solver stopped at max_iter before reaching tol\n";
  std::cout << "wrote " << (dir / "model.json").string() << "\n";
  return 0;
}

int cmd_score(const std::string& model_path, const std::string& csv_path, const std::string& meta_path,
              const std::string& out) {
  if (model_path.empty() || csv_path.empty()) throw UsageError("--model and --input are required");
  ModelBundle bundle;
  try {
    bundle = parse_model(slurp(model_path));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  BoardRun run;
  run.board_id = fs::path(csv_path).stem().string();
  {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + csv_path);
    run.series = parse_csv(in);
  }
  if (!meta_path.empty()) run.meta = parse_sidecar(slurp(meta_path));
  run.series = trim_invalid(run.series);
  const bool with_rate = dimension_of(bundle.model) == kChannelCount + 1;
  FeatureMatrix features = to_features(run, with_rate);
  if (bundle.scaler) features = apply_scaler(*bundle.scaler, features);
  const auto scores = score_rows(bundle.model, features);
  const auto labels = labels_from_scores(bundle.model, features, scores);
  std::ostringstream csv;
  csv << "time_s,score,label\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    csv << format_decimal(run.series[i].timestamp) << ',' << format_decimal(scores[i]) << ','
        << static_cast<int>(labels[i]) << '\n';
  const fs::path dir = prepare_out_dir(out);
  write_text(dir / (run.board_id + ".scores.csv"), csv.str());
  std::cout << "wrote " << (dir / (run.board_id + ".scores.csv")).string() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const Overrides& o, const std::string& out, bool plot) {
  const auto cfg = resolve_config(o);
  const auto runs = runs_from(manifest_path);
  const fs::path dir = prepare_out_dir(out);
  const auto set = build_training_set(runs, cfg.training);
  const auto result = evaluate_on(runs, set, set.train, cfg);
  auto j = to_json(result);
  j["tool_config"] = tool_config(cfg, out);
  write_json(dir / "evaluation.json", j);
  std::ostringstream csv;
  std::vector<EvalReport> evals;
  for (const auto& b : result.boards) evals.push_back(b.eval);
  write_eval_csv(evals, csv);
  write_text(dir / "evaluation.csv", csv.str());
  if (plot) {
    std::ostringstream p;
    write_plot_data(set, result, p);
    write_text(dir / "plot_data.csv", p.str());
  }
  for (const auto& b : result.boards) {
    std::cout << b.eval.board_id << ": f1=" << (b.eval.f1 ? format_decimal(*b.eval.f1) : "undefined")
              << " detection=" << (b.lead.detection_time ? format_decimal(*b.lead.detection_time) : "none")
              << " lead_vs_death="
              << (b.lead.lead_vs_death ? format_decimal(*b.lead.lead_vs_death) : "n/a")
              << (b.lead.saved ? " saved" : " not saved") << "\n";
  }
  return 0;
}

struct SweepArgs {
  std::string strategy = "head_lengths";
  std::vector<std::string> heads;
  std::vector<std::size_t> sizes;
  std::vector<std::string> feature_sets;
};

int cmd_sweep(const std::string& manifest_path, const Overrides& o, const SweepArgs& a, const std::string& out) {
  SweepConfig sc;
  sc.base = resolve_config(o);
  const auto strategy = strategy_from_name(a.strategy);
  if (!strategy) throw UsageError("unknown strategy " + a.strategy);
  sc.strategy = *strategy;
  if (!a.heads.empty()) {
    sc.head_lengths.clear();
    for (const auto& h : a.heads) {
      if (h == "all") sc.head_lengths.push_back(std::nullopt);
      else {
        try {
          sc.head_lengths.push_back(std::stoull(h));
        } catch (const std::exception&) {
          throw UsageError("bad head length " + h);
        }
      }
    }
  }
  if (!a.sizes.empty()) sc.subset_sizes = a.sizes;
  if (!a.feature_sets.empty()) {
    sc.feature_sets.clear();
    for (const auto& f : a.feature_sets) {
      const auto fs_ = feature_set_from_name(f);
      if (!fs_) throw UsageError("unknown feature set " + f);
      sc.feature_sets.push_back(*fs_);
    }
  }
  const auto runs = runs_from(manifest_path);
  const fs::path dir = prepare_out_dir(out);
  const auto report = run_sweep(sc, runs);
  auto j = to_json(report);
  j["tool_config"] = tool_config(sc.base, out);
  write_json(dir / "sweep.json", j);
  for (const auto& s : report.summary)
    std::cout << s.group << ": best " << s.best_key << " f1="
              << (s.best_f1 ? format_decimal(*s.best_f1) : "undefined") << "\n";
  return 0;
}

int cmd_compare(const std::string& manifest_path, const Overrides& o, const std::string& out) {
  const auto cfg = resolve_config(o);
  const auto runs = runs_from(manifest_path);
  const fs::path dir = prepare_out_dir(out);
  const auto report = compare_models(runs, cfg);
  auto j = to_json(report);
  j["tool_config"] = tool_config(cfg, out);
  write_json(dir / "comparison.json", j);
  std::vector<EvalReport> rows;
  for (const auto& m : report.models) rows.insert(rows.end(), m.reports.begin(), m.reports.end());
  std::ostringstream csv;
  write_eval_csv(rows, csv);
  write_text(dir / "comparison.csv", csv.str());
  for (const auto& m : report.models)
    std::cout << detector_name(m.kind) << ": mean f1=" << (m.mean.f1 ? format_decimal(*m.mean.f1) : "undefined")
              << "\n";
  return 0;
}

int cmd_anova(const std::string& manifest_path, const std::string& grouping, double alpha, const std::string& out) {
  stats::Grouping g;
  if (grouping == "rate") g = stats::Grouping::Rate;
  else if (grouping == "functioning") g = stats::Grouping::Functioning;
  else throw UsageError("grouping must be rate or functioning");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  const auto runs = runs_from(manifest_path);
  const fs::path dir = prepare_out_dir(out);
  if (g == stats::Grouping::Functioning &&
      std::none_of(runs.begin(), runs.end(), [](const BoardRun& r) { return r.meta.rate_gy_per_h == 0.0; }))
    throw Error(ErrorCode::InvalidArgument, "functioning grouping needs at least one board with rate 0");
  const auto reports = stats::analyze_runs(runs, g, alpha);
  nlohmann::ordered_json j;
  j["tool_config"] = {{"grouping", grouping}, {"alpha", alpha}, {"output_dir", out}};
  j["channels"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& p : r.posthoc.pairs)
      pairs.push_back({{"a", r.posthoc.group_ids[p.a]},
                       {"b", r.posthoc.group_ids[p.b]},
                       {"t", p.t},
                       {"p", p.p},
                       {"significant", p.significant}});
    j["channels"].push_back({{"channel", std::string(channel_name(r.channel))},
                             {"df_effect", r.df_effect},
                             {"df_error", r.df_error},
                             {"f", r.f_infinite ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.f_value)},
                             {"f_infinite", r.f_infinite},
                             {"eta_sq", r.eta_sq},
                             {"p", r.p_value},
                             {"effect", std::string(stats::effect_class_name(r.effect_class))},
                             {"corrected_alpha", r.posthoc.corrected_alpha},
                             {"pairs", std::move(pairs)}});
  }
  write_json(dir / "anova.json", j);
  const auto table = stats::render_table(reports, grouping == "rate" ? "Radiation rate" : "Functioning");
  write_text(dir / "anova.txt", table);
  std::cout << table;
  return 0;
}

int cmd_plotdata(const std::string& manifest_path, const Overrides& o, const std::string& out) {
  const auto cfg = resolve_config(o);
  const auto runs = runs_from(manifest_path);
  const fs::path dir = prepare_out_dir(out);
  const auto set = build_training_set(runs, cfg.training);
  const auto result = evaluate_on(runs, set, set.train, cfg);
  std::ostringstream p;
  write_plot_data(set, result, p);
  write_text(dir / "plot_data.csv", p.str());
  std::cout << "wrote " << (dir / "plot_data.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Board telemetry anomaly detection under gamma radiation"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --out follow the subcommand
  std::string out = default_out_dir();
  app.add_option("--out", out, std::string("output directory (default $") + kOutEnv + " or .)");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "write a simulated suite (CSV + sidecar per board, manifest)");
  simulate->add_option("--suite", sim_args.suite_path, "scenario suite JSON (default: the six-rate suite)");
  simulate->add_option("--seed", sim_args.seed, "suite seed");

  std::string manifest;
  auto add_manifest = [&](CLI::App* c) { c->add_option("--manifest", manifest, "run manifest JSON"); };

  auto* trim = app.add_subcommand("trim", "drop records with zero or undefined temperatures");
  add_manifest(trim);

  Overrides o;
  auto* train = app.add_subcommand("train", "train a detector and save the model");
  add_manifest(train);
  add_config_flags(train, o);

  std::string model_path, input_csv, input_meta;
  auto* score = app.add_subcommand("score", "score one CSV with a saved model");
  score->add_option("--model", model_path, "model JSON from train");
  score->add_option("--input", input_csv, "telemetry CSV");
  score->add_option("--meta", input_meta, "sidecar JSON (needed for rate features)");

  bool plot = false;
  auto* evaluate = app.add_subcommand("evaluate", "train, score every board, report metrics and lead times");
  add_manifest(evaluate);
  add_config_flags(evaluate, o);
  evaluate->add_flag("--plot", plot, "also write plot_data.csv");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "per_board, board_subsets or head_lengths study");
  add_manifest(sweep);
  add_config_flags(sweep, o);
  sweep->add_option("--strategy", sweep_args.strategy, "per_board | board_subsets | head_lengths");
  sweep->add_option("--heads", sweep_args.heads, "head lengths (numbers or 'all')");
  sweep->add_option("--sizes", sweep_args.sizes, "subset sizes");
  sweep->add_option("--feature-sets", sweep_args.feature_sets, "feature sets to cross with the strategy");

  auto* compare = app.add_subcommand("compare", "compare all detectors on one training set");
  add_manifest(compare);
  add_config_flags(compare, o);

  std::string grouping = "rate";
  double alpha = 0.05;
  auto* anova = app.add_subcommand("anova", "per-channel one-way ANOVA with effect sizes");
  add_manifest(anova);
  anova->add_option("--grouping", grouping, "rate | functioning");
  anova->add_option("--alpha", alpha, "significance level");

  auto* plotdata = app.add_subcommand("plotdata", "tidy CSV of telemetry, annotation and model output");
  add_manifest(plotdata);
  add_config_flags(plotdata, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      sim_args.out = out;
      return cmd_simulate(sim_args);
    }
    if (*trim) return cmd_trim(manifest, out);
    if (*train) return cmd_train(manifest, o, out);
    if (*score) return cmd_score(model_path, input_csv, input_meta, out);
    if (*evaluate) return cmd_evaluate(manifest, o, out, plot);
    if (*sweep) return cmd_sweep(manifest, o, sweep_args, out);
    if (*compare) return cmd_compare(manifest, o, out);
    if (*anova) return cmd_anova(manifest, grouping, alpha, out);
    if (*plotdata) return cmd_plotdata(manifest, o, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::BadHyperparameter ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
