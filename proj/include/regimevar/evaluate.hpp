#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regimevar/backtest.hpp"
#include "regimevar/dates.hpp"

namespace regimevar {

/// Per-date binary breach indicators for one (model, asset, level) cell
/// over a common evaluation calendar.
struct BreachSet {
  std::string model;
  std::vector<Date> dates;
  std::vector<std::uint8_t> breached;

  int count() const;
  std::vector<Date> breach_dates() const;
};

/// 1.0 if a has strictly fewer breaches than b, 0.0 if more, 0.5 on a tie.
double comp_value(const BreachSet& a, const BreachSet& b);

/// Paired t-test on per-date indicator differences; two-sided by default.
/// Zero variance of the differences gives p = 1.0 by convention.
double paired_t_test(const BreachSet& a, const BreachSet& b,
                     bool two_sided = true);

/// dom = |dates(a) intersect dates(b)| / |dates(a)| - 1, in [-1, 0];
/// absent when a never breaches.
std::optional<double> dominance(const BreachSet& a, const BreachSet& b);

struct ComparisonCell {
  double comp = 0.5;
  double pvalue = 1.0;
  std::optional<double> dom;
};

struct PanelReport {
  double level = 0.0;
  std::string asset;
  std::vector<std::string> models;
  std::vector<int> breach_counts;
  std::vector<double> breach_rates;
  std::vector<BreachCostSummary> costs;
  /// cells[row][col]; diagonal untouched.
  std::vector<std::vector<ComparisonCell>> cells;
  int observations = 0;
};

struct ComparisonReport {
  std::vector<PanelReport> panels;
};

/// Groups breach records into per-(level, asset) panels of BreachSets.
/// Every model in a panel must share the panel's evaluation calendar.
struct BreachPanel {
  double level = 0.0;
  std::string asset;
  std::vector<BreachSet> sets;
  std::vector<std::vector<BreachRecord>> records;  // aligned with sets
};

std::vector<BreachPanel> build_breach_panels(
    const std::vector<BreachRecord>& records);

/// Full pairwise comparison matrix plus breach-count and cost tables.
ComparisonReport comparison_matrix(const std::vector<BreachPanel>& panels,
                                   bool two_sided = true,
                                   bool raw_loss_costs = false);

/// Aggregate comp totals over paired model groups (the 2,000- vs
/// 1,000-day comparison scheme): group_a accumulates comp(a_i, b_i),
/// group_b the reverse; the two always sum to the pair count.
struct CompTotals {
  double group_a = 0.0;
  double group_b = 0.0;
  int pairs = 0;
};

CompTotals comp_totals(
    const std::vector<std::pair<BreachSet, BreachSet>>& pairs);

}  // namespace regimevar
