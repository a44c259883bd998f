#pragma once

// Radiation-effect statistics: per-channel one-way ANOVA, partial eta
// squared with Cohen classes, F upper-tail probabilities and Bonferroni
// pairwise comparisons.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radwatch/telemetry.hpp"

namespace radwatch::stats {

struct Group {
  std::string id;
  std::vector<double> samples;
};

struct GroupedSamples {
  std::vector<Group> groups;

  // At least 2 groups with at least 2 samples each; throws InvalidArgument.
  void validate() const;
};

struct AnovaResult {
  double f = 0.0;
  std::size_t df_effect = 0;
  std::size_t df_error = 0;
  double ss_effect = 0.0;
  double ss_error = 0.0;
  // SS_error == 0: F is +inf when SS_effect > 0, NaN when both vanish.
  bool degenerate = false;
};

AnovaResult one_way_anova(const GroupedSamples& g);

// ss_effect / (ss_effect + ss_error). Throws BothZero.
double partial_eta_squared(double ss_effect, double ss_error);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double x, double a, double b);

// P(F > f) and P(F <= f) for F(d1, d2).
double f_cdf_complement(double f, double d1, double d2);
double f_cdf(double f, double d1, double d2);

enum class EffectClass { Small, Medium, Large, VeryLarge };

std::string_view effect_class_name(EffectClass c);
EffectClass classify_effect(double eta_sq);

struct PooledT {
  double t = 0.0;
  std::size_t df = 0;
  double p = 1.0;  // two-sided
};

PooledT pooled_t_test(std::span<const double> a, std::span<const double> b);

struct PairComparison {
  std::size_t a = 0;
  std::size_t b = 0;
  double t = 0.0;
  double p = 1.0;
  bool significant = false;
};

struct Posthoc {
  std::vector<std::string> group_ids;
  double alpha = 0.05;
  std::size_t comparisons = 0;
  double corrected_alpha = 0.05;
  std::vector<PairComparison> pairs;

  // Symmetric; nullopt on the diagonal.
  std::optional<bool> significant(std::size_t i, std::size_t j) const;
  std::size_t significant_count() const;
};

Posthoc bonferroni_posthoc(const GroupedSamples& g, double alpha = 0.05);

struct AnovaReport {
  ChannelId channel = ChannelId::TPmic;
  std::size_t df_effect = 0;
  std::size_t df_error = 0;
  double f_value = 0.0;
  bool f_infinite = false;
  double eta_sq = 0.0;
  double p_value = 1.0;
  EffectClass effect_class = EffectClass::Small;
  Posthoc posthoc;
};

AnovaReport analyze(ChannelId channel, const GroupedSamples& g, double alpha = 0.05);

enum class Grouping {
  Rate,         // one group per distinct radiation rate
  Functioning,  // radiation site (rate > 0) versus non-radiation site
};

// Per-channel samples from trimmed runs, grouped as requested. Group order
// is ascending rate (or functioning flag 0 = radiation, 1 = non-radiation).
std::vector<GroupedSamples> group_runs(const std::vector<BoardRun>& runs, Grouping grouping);

std::vector<AnovaReport> analyze_runs(const std::vector<BoardRun>& runs, Grouping grouping,
                                      double alpha = 0.05);

// Rows in the order T_PMIC, T_FPGA, V_aux, V_ddr3, V_core, V_tt, V_cco with
// significance stars (* p < .05, ** p < .01, *** p < .001) and the error df.
std::string render_table(const std::vector<AnovaReport>& reports, std::string_view source);

}  // namespace radwatch::stats
