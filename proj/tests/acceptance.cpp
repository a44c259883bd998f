// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "radwatch/detectors.hpp"
#include "radwatch/harness.hpp"
#include "radwatch/simulator.hpp"
#include "radwatch/stats.hpp"
#include "support.hpp"

using namespace radwatch;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

double value(const std::optional<double>& x) { return x ? *x : -1.0; }

oracle::Matrix rows_of(const FeatureMatrix& m) {
  oracle::Matrix out;
  for (std::size_t i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
  return out;
}

// ---- 1 ----------------------------------------------------------------------

Outcome metric_exactness() {
  Outcome o;
  LabelSeq truth(40, 0), pred(40, 0);
  for (int i = 0; i < 10; ++i) truth[i] = 1;
  for (int i = 0; i < 5; ++i) pred[i] = 1;
  for (int i = 20; i < 23; ++i) pred[i] = 1;
  const auto r = precision_recall_f1(pred, truth);
  o.require(r.precision && *r.precision == 0.625, "precision == 0.625");
  o.require(r.recall && *r.recall == 0.5, "recall == 0.5");
  o.note("precision=" + fmt(value(r.precision)) + " recall=" + fmt(value(r.recall)));
  return o;
}

// ---- 2 ----------------------------------------------------------------------

Outcome ocsvm_dual() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(20210);
  double worst_feas = 0.0, worst_rel = 0.0;
  const int fixtures = 24;
  for (int f = 0; f < fixtures; ++f) {
    const std::size_t n = 10 + rng.below(31);
    const std::size_t d = 1 + rng.below(5);
    const double nu = 0.05 + 0.5 * rng.uniform();
    const double gamma = 0.1 + rng.uniform();
    const auto data = testing::gaussian_matrix(rng, n, d);
    const auto sol = solve_ocsvm_dual(data, nu, gamma, 1e-10, 1'000'000);
    const double sum = std::accumulate(sol.alphas.begin(), sol.alphas.end(), 0.0);
    worst_feas = std::max(worst_feas, std::abs(sum - 1.0));
    for (double a : sol.alphas) {
      worst_feas = std::max(worst_feas, -a);
      worst_feas = std::max(worst_feas, a - sol.upper_bound);
    }
    const double expected = oracle::ocsvm_dual_objective(oracle::rbf_gram(rows_of(data), gamma), nu);
    worst_rel = std::max(worst_rel, std::abs(sol.objective - expected) / std::abs(expected));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst_feas <= 1e-6, "feasibility within 1e-6");
  o.require(worst_rel <= 1e-6, "objective within 1e-6 relative");
  o.require(elapsed < 30.0, "runtime < 30 s");
  o.note(std::to_string(fixtures) + " fixtures, max infeasibility " + sci(worst_feas) + ", max rel objective gap " +
         sci(worst_rel) + ", " + fmt(elapsed, 2) + " s");
  return o;
}

// ---- 3 ----------------------------------------------------------------------

Outcome nu_property() {
  Outcome o;
  for (double nu : {0.05, 0.1, 0.2}) {
    Rng rng(2021);
    const auto data = testing::gaussian_matrix(rng, 400, 2);
    OcsvmParams p;
    p.nu = nu;
    const auto model = train_ocsvm(data, p);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) outside += ocsvm_decision(model, data.row(i)) <= 0.0;
    const double frac = static_cast<double>(outside) / 400.0;
    o.require(frac <= nu + 0.05, "nu=" + fmt(nu, 2) + " fraction <= nu + 0.05");
    o.note("nu=" + fmt(nu, 2) + ": " + fmt(frac, 4));
  }
  return o;
}

// ---- 4 ----------------------------------------------------------------------

FeatureMatrix correlated(Rng& rng, std::size_t n, std::size_t d) {
  const auto m = testing::gaussian_matrix(rng, n, d);
  FeatureMatrix out(d, {});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(m.row(i).begin(), m.row(i).end());
    for (std::size_t j = 1; j < d; ++j) r[j] += 0.6 * r[j - 1];
    out.append_row(r);
  }
  return out;
}

Outcome mcd_oracle() {
  Outcome o;
  Rng rng(1212);
  double worst = 0.0;
  const int fixtures = 30;
  for (int f = 0; f < fixtures; ++f) {
    const std::size_t d = 1 + rng.below(3);
    const std::size_t n = d + 4 + rng.below(12 - d - 3);
    const auto data = correlated(rng, n, d);
    const std::size_t h = mcd_default_h(n, d);
    McdParams p;
    p.exhaustive_limit = 0;  // force the C-step search
    p.seed = 7000 + f;
    const auto fit = fit_mcd(data, h, p);
    const double expected = oracle::mcd_exhaustive(rows_of(data), h);
    const double rel = std::abs(fit.determinant - expected) / std::abs(expected);
    worst = std::max(worst, rel);
    o.require(!fit.exhaustive, "C-steps used on fixture " + std::to_string(f));
  }
  o.require(worst <= 1e-12, "determinant within 1e-12 relative");
  o.note(std::to_string(fixtures) + " fixtures n<=12, max rel det gap " + sci(worst));
  return o;
}

// ---- 5 ----------------------------------------------------------------------

Outcome lof_oracle() {
  Outcome o;
  Rng rng(5150);
  double worst = 0.0;
  for (int f = 0; f < 10; ++f) {
    const std::size_t n = 8 + rng.below(23);
    const std::size_t d = 1 + rng.below(4);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n - 1, 10));
    const auto data = testing::gaussian_matrix(rng, n, d);
    LofParams p;
    p.k = k;
    const auto model = train_lof(data, p);
    const oracle::Lof ref{rows_of(data), k};
    const auto train_scores = lof_training_scores(model);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> x(data.row(i).begin(), data.row(i).end());
      worst = std::max(worst, std::abs(train_scores[i] - ref.score(x, static_cast<std::ptrdiff_t>(i))));
    }
    for (int q = 0; q < 5; ++q) {
      std::vector<double> x(d);
      for (auto& v : x) v = rng.normal(0.0, 2.0);
      worst = std::max(worst, std::abs(lof_score(model, x) - ref.score(x)));
    }
  }
  o.require(worst <= 1e-9, "scores within 1e-9");
  o.note("10 fixtures n<=30, max abs gap " + sci(worst));
  return o;
}

// ---- 6 ----------------------------------------------------------------------

Outcome mahalanobis_properties() {
  Outcome o;
  Rng rng(6006);
  double at_mean = 0.0, euclid = 0.0, affine = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 2 + rng.below(4);
    std::vector<double> mu(d), cov(d * d, 0.0), id(d * d, 0.0);
    oracle::Matrix l(d, std::vector<double>(d, 0.0));
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b <= a; ++b) l[a][b] = a == b ? 0.5 + rng.uniform() : rng.normal(0.0, 0.5);
    for (std::size_t a = 0; a < d; ++a) {
      mu[a] = rng.normal();
      id[a * d + a] = 1.0;
      for (std::size_t b = 0; b < d; ++b)
        for (std::size_t k = 0; k < d; ++k) cov[a * d + b] += l[a][k] * l[b][k];
    }
    const auto m1 = make_envelope(mu, cov);
    at_mean = std::max(at_mean, mahalanobis(m1, mu));

    const auto mi = make_envelope(mu, id);
    for (int s = 0; s < 10; ++s) {
      std::vector<double> x(d);
      for (auto& v : x) v = rng.normal(0.0, 4.0);
      const double e = std::sqrt(oracle::sqdist(x, mu));
      euclid = std::max(euclid, std::abs(mahalanobis(mi, x) - e) / std::max(1.0, e));
    }

    // y = A x + c
    oracle::Matrix A(d, std::vector<double>(d));
    std::vector<double> c(d);
    for (std::size_t a = 0; a < d; ++a) {
      c[a] = rng.normal(0.0, 10.0);
      for (std::size_t b = 0; b < d; ++b) A[a][b] = (a == b ? 2.0 : 0.0) + rng.normal(0.0, 0.4);
    }
    std::vector<double> mu2(c), cov2(d * d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) mu2[a] += A[a][b] * mu[b];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        for (std::size_t p = 0; p < d; ++p)
          for (std::size_t q = 0; q < d; ++q) cov2[a * d + b] += A[a][p] * cov[p * d + q] * A[b][q];
    const auto m2 = make_envelope(mu2, cov2);
    for (int s = 0; s < 10; ++s) {
      std::vector<double> x(d), y(c);
      for (auto& v : x) v = rng.normal(0.0, 3.0);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) y[a] += A[a][b] * x[b];
      const double d1 = mahalanobis(m1, x), d2 = mahalanobis(m2, y);
      affine = std::max(affine, std::abs(d1 - d2) / std::max(1.0, d1));
    }
  }
  o.require(at_mean == 0.0, "d(mu) == 0");
  o.require(euclid <= 1e-12, "identity covariance is euclidean within 1e-12");
  o.require(affine <= 1e-6, "affine invariance within 1e-6");
  o.note("d(mu)=" + sci(at_mean) + ", euclid gap " + sci(euclid) + ", affine gap " + sci(affine));
  return o;
}

// ---- 7 ----------------------------------------------------------------------

Outcome anova_correctness() {
  using namespace stats;
  Outcome o;
  Rng rng(7007);
  double worst_ft = 0.0;
  for (int f = 0; f < 20; ++f) {
    GroupedSamples g;
    for (int i = 0; i < 2; ++i) {
      Group grp{"g" + std::to_string(i), {}};
      const std::size_t n = 2 + rng.below(30);
      const double shift = rng.normal(0.0, 0.7);
      for (std::size_t j = 0; j < n; ++j) grp.samples.push_back(rng.normal(shift, 1.0 + rng.uniform()));
      g.groups.push_back(std::move(grp));
    }
    const double f_val = one_way_anova(g).f;
    const double t = oracle::pooled_t(g.groups[0].samples, g.groups[1].samples);
    worst_ft = std::max(worst_ft, std::abs(f_val - t * t) / std::max(1.0, t * t));
  }
  o.require(worst_ft <= 1e-9, "F == t^2 within 1e-9");

  bool eta_ok = true;
  for (int i = 0; i < 200; ++i) {
    const double e = partial_eta_squared(rng.uniform() * 10, rng.uniform() * 10);
    eta_ok = eta_ok && e >= 0.0 && e <= 1.0;
  }
  o.require(eta_ok, "eta^2 in [0, 1]");
  const bool classes = classify_effect(0.005) == EffectClass::Small && classify_effect(0.01) == EffectClass::Small &&
                       classify_effect(std::nextafter(0.01, 1.0)) == EffectClass::Medium &&
                       classify_effect(0.06) == EffectClass::Medium &&
                       classify_effect(std::nextafter(0.06, 1.0)) == EffectClass::Large &&
                       classify_effect(0.14) == EffectClass::Large &&
                       classify_effect(std::nextafter(0.14, 1.0)) == EffectClass::VeryLarge &&
                       classify_effect(0.214) == EffectClass::VeryLarge;
  o.require(classes, "Cohen thresholds .01/.06/.14");

  bool monotone = true;
  double worst_comp = 0.0;
  for (double d1 : {1.0, 3.0, 6.0})
    for (double d2 : {2.0, 17.0, 400.0, 13804.0}) {
      double prev = 1.0;
      for (double f = 0.0; f < 40.0; f += 0.25) {
        const double p = f_cdf_complement(f, d1, d2);
        monotone = monotone && p <= prev;
        worst_comp = std::max(worst_comp, std::abs(p + f_cdf(f, d1, d2) - 1.0));
        prev = p;
      }
    }
  o.require(monotone, "F tail monotone");
  o.require(worst_comp <= 1e-9, "tails complementary within 1e-9");
  o.note("max |F - t^2| rel " + sci(worst_ft) + ", max complement gap " + sci(worst_comp));
  return o;
}

// ---- 8 to 11: seeded simulated suite -----------------------------------------

struct Suite {
  std::vector<BoardRun> runs;
  double simulate_s = 0.0;
};

Suite simulated_suite() {
  Suite s;
  const auto t0 = Clock::now();
  for (const auto& sc : sim::default_suite().scenarios) s.runs.push_back(sim::simulate_run(sc));
  s.simulate_s = seconds_since(t0);
  return s;
}

Outcome all_saved(const Suite& suite) {
  Outcome o;
  const auto t0 = Clock::now();
  const auto res = run_pipeline(suite.runs, PipelineConfig{});
  const double elapsed = seconds_since(t0) + suite.simulate_s;
  std::size_t detected = 0, saved = 0, on_time = 0;
  for (const auto& b : res.boards) {
    detected += b.lead.detection_time.has_value();
    saved += b.lead.lead_vs_death && *b.lead.lead_vs_death > 0.0;
    on_time += b.lead.lead_vs_annotation && *b.lead.lead_vs_annotation >= 0.0;
    o.note(b.eval.board_id + " lead_vs_death=" + fmt(value(b.lead.lead_vs_death), 0) +
           "s lead_vs_annotation=" + fmt(value(b.lead.lead_vs_annotation), 0) + "s");
  }
  o.require(res.boards.size() == 6, "6 boards");
  o.require(detected == 6, "detection on all boards");
  o.require(saved == 6, "lead_vs_death > 0 on all boards");
  o.require(on_time >= 5, "at least 5/6 on time");
  o.require(elapsed < 120.0, "runtime < 2 min");
  o.note(std::to_string(saved) + "/6 saved, " + std::to_string(on_time) + "/6 on time, " + fmt(elapsed, 2) + " s");
  return o;
}

Outcome model_ranking(const Suite& suite) {
  Outcome o;
  const auto cmp = compare_models(suite.runs, PipelineConfig{});
  double ocsvm = -1.0;
  for (const auto& m : cmp.models)
    if (m.kind == DetectorKind::Ocsvm) ocsvm = value(m.mean.f1);
  for (const auto& m : cmp.models) {
    const std::string name(detector_name(m.kind));
    o.note(name + " F1=" + fmt(value(m.mean.f1)));
    if (m.kind != DetectorKind::Ocsvm) o.require(ocsvm >= value(m.mean.f1), "ocsvm F1 >= " + name);
  }
  return o;
}

Outcome feature_sets(const Suite& suite) {
  Outcome o;
  PipelineConfig sensors, with_rate;
  with_rate.training.feature_set = FeatureSet::SensorsPlusRate;
  const double p1 = value(run_pipeline(suite.runs, sensors).mean.precision);
  const double p2 = value(run_pipeline(suite.runs, with_rate).mean.precision);
  o.require(p1 >= 0.0 && p1 >= p2, "sensors precision >= sensors+rate precision");
  o.note("sensors P=" + fmt(p1) + ", sensors+rate P=" + fmt(p2));
  return o;
}

Outcome head_lengths(const Suite& suite) {
  Outcome o;
  SweepConfig sc;
  sc.strategy = SweepStrategy::HeadLengths;
  const auto report = run_sweep(sc, suite.runs);
  std::optional<double> f300, f420;
  double beyond = -1.0;
  for (const auto& c : report.cells) {
    const double f = value(c.mean.f1);
    o.note(c.key + " F1=" + fmt(f));
    if (c.head_n == 300u) f300 = f;
    else if (c.head_n == 420u) f420 = f;
    else if (!c.head_n || *c.head_n > 420) beyond = std::max(beyond, f);
  }
  o.require(f300 && f420, "cells for 300 and 420");
  if (f300 && f420) {
    o.require(*f420 >= *f300 - 0.05, "F1(420) >= F1(300) - 0.05");
    o.require(beyond <= *f420 + 0.05, "no head beyond 420 improves F1 by more than 0.05");
    o.note("best gain beyond 420: " + fmt(beyond - *f420));
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  Suite suite;
  bool suite_ready = false;
  auto with_suite = [&](Outcome (*f)(const Suite&)) {
    return [&, f] {
      if (!suite_ready) {
        suite = simulated_suite();
        suite_ready = true;
      }
      return f(suite);
    };
  };
  const std::vector<Criterion> criteria = {
      {1, "metric exactness", metric_exactness},
      {2, "OCSVM dual feasibility and optimality", ocsvm_dual},
      {3, "nu-property", nu_property},
      {4, "MCD oracle equivalence", mcd_oracle},
      {5, "LOF oracle equivalence", lof_oracle},
      {6, "Mahalanobis properties", mahalanobis_properties},
      {7, "ANOVA correctness", anova_correctness},
      {8, "all boards saved", with_suite(all_saved)},
      {9, "model ranking", with_suite(model_ranking)},
      {10, "feature-set comparison", with_suite(feature_sets)},
      {11, "head-length plateau", with_suite(head_lengths)},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
