#include "radwatch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "radwatch/error.hpp"

namespace radwatch::stats {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sum_sq_dev(std::span<const double> v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc;
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_cf(double x, double a, double b) {
  constexpr int kMaxIter = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

void GroupedSamples::validate() const {
  if (groups.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 groups");
  for (const auto& g : groups)
    if (g.samples.size() < 2)
      throw Error(ErrorCode::InvalidArgument, "group '" + g.id + "' has fewer than 2 samples");
}

AnovaResult one_way_anova(const GroupedSamples& g) {
  g.validate();
  std::size_t total = 0;
  double grand_sum = 0.0;
  for (const auto& grp : g.groups) {
    total += grp.samples.size();
    grand_sum += std::accumulate(grp.samples.begin(), grp.samples.end(), 0.0);
  }
  const double grand_mean = grand_sum / static_cast<double>(total);
  AnovaResult r;
  for (const auto& grp : g.groups) {
    const double m = mean_of(grp.samples);
    r.ss_effect += static_cast<double>(grp.samples.size()) * (m - grand_mean) * (m - grand_mean);
    r.ss_error += sum_sq_dev(grp.samples, m);
  }
  r.df_effect = g.groups.size() - 1;
  r.df_error = total - g.groups.size();
  if (r.ss_error == 0.0) {
    r.degenerate = true;
    r.f = r.ss_effect > 0.0 ? std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.f = (r.ss_effect / static_cast<double>(r.df_effect)) /
        (r.ss_error / static_cast<double>(r.df_error));
  return r;
}

double partial_eta_squared(double ss_effect, double ss_error) {
  if (ss_effect < 0.0 || ss_error < 0.0)
    throw Error(ErrorCode::InvalidArgument, "sums of squares must be non-negative");
  if (ss_effect == 0.0 && ss_error == 0.0)
    throw Error(ErrorCode::BothZero, "eta squared undefined when both sums of squares are zero");
  return ss_effect / (ss_effect + ss_error);
}

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a + 1) / (a + b + 2); otherwise use
  // the reflection I_x(a, b) = 1 - I_{1-x}(b, a).
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double f_cdf_complement(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "F degrees of freedom must be positive");
  if (std::isnan(f)) return std::numeric_limits<double>::quiet_NaN();
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / (d2 + d1 * f), 0.5 * d2, 0.5 * d1);
}

double f_cdf(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "F degrees of freedom must be positive");
  if (std::isnan(f)) return std::numeric_limits<double>::quiet_NaN();
  if (f <= 0.0) return 0.0;
  if (std::isinf(f)) return 1.0;
  return incomplete_beta(d1 * f / (d1 * f + d2), 0.5 * d1, 0.5 * d2);
}

std::string_view effect_class_name(EffectClass c) {
  switch (c) {
    case EffectClass::Small: return "small";
    case EffectClass::Medium: return "medium";
    case EffectClass::Large: return "large";
    case EffectClass::VeryLarge: return "very large";
  }
  return "unknown";
}

EffectClass classify_effect(double eta_sq) {
  if (eta_sq <= 0.01) return EffectClass::Small;
  if (eta_sq <= 0.06) return EffectClass::Medium;
  if (eta_sq <= 0.14) return EffectClass::Large;
  return EffectClass::VeryLarge;
}

PooledT pooled_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::InvalidArgument, "t test needs 2 samples per group");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  PooledT r;
  r.df = a.size() + b.size() - 2;
  const double sp2 = (sum_sq_dev(a, ma) + sum_sq_dev(b, mb)) / static_cast<double>(r.df);
  const double se = std::sqrt(sp2 * (1.0 / static_cast<double>(a.size()) + 1.0 / static_cast<double>(b.size())));
  if (se == 0.0) {
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / se;
  r.p = f_cdf_complement(r.t * r.t, 1.0, static_cast<double>(r.df));
  return r;
}

std::optional<bool> Posthoc::significant(std::size_t i, std::size_t j) const {
  if (i == j) return std::nullopt;
  if (i > j) std::swap(i, j);
  for (const auto& p : pairs)
    if (p.a == i && p.b == j) return p.significant;
  return std::nullopt;
}

std::size_t Posthoc::significant_count() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const PairComparison& p) { return p.significant; }));
}

Posthoc bonferroni_posthoc(const GroupedSamples& g, double alpha) {
  g.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  Posthoc out;
  const std::size_t k = g.groups.size();
  for (const auto& grp : g.groups) out.group_ids.push_back(grp.id);
  out.alpha = alpha;
  out.comparisons = k * (k - 1) / 2;
  out.corrected_alpha = alpha / static_cast<double>(out.comparisons);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto t = pooled_t_test(g.groups[i].samples, g.groups[j].samples);
      out.pairs.push_back({i, j, t.t, t.p, t.p < out.corrected_alpha});
    }
  return out;
}

AnovaReport analyze(ChannelId channel, const GroupedSamples& g, double alpha) {
  const auto a = one_way_anova(g);
  AnovaReport r;
  r.channel = channel;
  r.df_effect = a.df_effect;
  r.df_error = a.df_error;
  r.f_value = a.f;
  r.f_infinite = a.degenerate;
  r.eta_sq = (a.ss_effect == 0.0 && a.ss_error == 0.0) ? 0.0 : partial_eta_squared(a.ss_effect, a.ss_error);
  r.p_value = a.degenerate ? (std::isinf(a.f) ? 0.0 : 1.0)
                           : f_cdf_complement(a.f, static_cast<double>(a.df_effect),
                                              static_cast<double>(a.df_error));
  r.effect_class = classify_effect(r.eta_sq);
  r.posthoc = bonferroni_posthoc(g, alpha);
  return r;
}

std::vector<GroupedSamples> group_runs(const std::vector<BoardRun>& runs, Grouping grouping) {
  // key -> per-channel samples
  std::map<double, std::array<std::vector<double>, kChannelCount>> buckets;
  for (const auto& run : runs) {
    double key = run.meta.rate_gy_per_h;
    if (grouping == Grouping::Functioning) key = run.meta.rate_gy_per_h > 0.0 ? 0.0 : 1.0;
    auto& bucket = buckets[key];
    const TelemetrySeries trimmed = trim_invalid(run.series);
    for (const auto& rec : trimmed.records())
      for (std::size_t c = 0; c < kChannelCount; ++c) bucket[c].push_back(rec.values[c]);
  }
  std::vector<GroupedSamples> out(kChannelCount);
  for (const auto& [key, bucket] : buckets) {
    std::string id;
    if (grouping == Grouping::Functioning) id = key == 0.0 ? "0" : "1";
    else id = format_decimal(key);
    for (std::size_t c = 0; c < kChannelCount; ++c) out[c].groups.push_back({id, bucket[c]});
  }
  return out;
}

std::vector<AnovaReport> analyze_runs(const std::vector<BoardRun>& runs, Grouping grouping, double alpha) {
  const auto grouped = group_runs(runs, grouping);
  std::vector<AnovaReport> out;
  for (ChannelId c : kAllChannels) out.push_back(analyze(c, grouped[index_of(c)], alpha));
  return out;
}

namespace {

const char* table_label(ChannelId c) {
  switch (c) {
    case ChannelId::TPmic: return "T_PMIC";
    case ChannelId::TFpga: return "T_FPGA";
    case ChannelId::VCore: return "V_core";
    case ChannelId::VAux: return "V_aux";
    case ChannelId::VDdr3: return "V_ddr3";
    case ChannelId::VTt: return "V_tt";
    case ChannelId::VCco: return "V_cco";
  }
  return "?";
}

}  // namespace

std::string render_table(const std::vector<AnovaReport>& reports, std::string_view source) {
  static constexpr ChannelId kOrder[] = {ChannelId::TPmic, ChannelId::TFpga, ChannelId::VAux,
                                         ChannelId::VDdr3, ChannelId::VCore, ChannelId::VTt,
                                         ChannelId::VCco};
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %-10s %4s %16s %6s  %s\n", "Source", "Variable", "df", "F",
                "eta2", "effect");
  out << line;
  bool first = true;
  std::size_t df_error = 0;
  for (ChannelId c : kOrder) {
    const auto it = std::find_if(reports.begin(), reports.end(),
                                 [c](const AnovaReport& r) { return r.channel == c; });
    if (it == reports.end()) continue;
    df_error = it->df_error;
    std::string stars;
    if (it->p_value < 0.001) stars = "***";
    else if (it->p_value < 0.01) stars = "**";
    else if (it->p_value < 0.05) stars = "*";
    char fbuf[48];
    if (it->f_infinite) std::snprintf(fbuf, sizeof fbuf, "%s%s", std::isinf(it->f_value) ? "inf" : "nan", stars.c_str());
    else std::snprintf(fbuf, sizeof fbuf, "%.3f%s", it->f_value, stars.c_str());
    char eta[16];
    std::snprintf(eta, sizeof eta, "%.3f", it->eta_sq);
    // Report style drops the leading zero (".214").
    const char* eta_text = eta[0] == '0' ? eta + 1 : eta;
    std::snprintf(line, sizeof line, "%-20s %-10s %4zu %16s %6s  %s\n",
                  first ? std::string(source).c_str() : "", table_label(c),
                  it->df_effect, fbuf, eta_text, std::string(effect_class_name(it->effect_class)).c_str());
    out << line;
    first = false;
  }
  std::snprintf(line, sizeof line, "%-20s %-10s %zu\n", "Error", "", df_error);
  out << line;
  out << "Univariate one-way ANOVA per channel; * p < .05, ** p < .01, *** p < .001\n";
  return out.str();
}

}  // namespace radwatch::stats
