#include "regimevar/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "regimevar/errors.hpp"
#include "regimevar/stats.hpp"

namespace regimevar {

int BreachSet::count() const {
  int total = 0;
  for (std::uint8_t b : breached) total += b ? 1 : 0;
  return total;
}

std::vector<Date> BreachSet::breach_dates() const {
  std::vector<Date> out;
  for (std::size_t i = 0; i < breached.size(); ++i) {
    if (breached[i]) out.push_back(dates[i]);
  }
  return out;
}

namespace {

void require_aligned(const BreachSet& a, const BreachSet& b) {
  if (a.dates.size() != b.dates.size() ||
      !std::equal(a.dates.begin(), a.dates.end(), b.dates.begin()))
    throw DataError("breach sets '" + a.model + "' and '" + b.model +
                    "' are not on a common calendar");
  if (a.breached.size() != a.dates.size() ||
      b.breached.size() != b.dates.size())
    throw DataError("breach indicators do not cover the calendar");
}

}  // namespace

double comp_value(const BreachSet& a, const BreachSet& b) {
  require_aligned(a, b);
  const int ca = a.count();
  const int cb = b.count();
  if (ca < cb) return 1.0;
  if (ca > cb) return 0.0;
  return 0.5;
}

double paired_t_test(const BreachSet& a, const BreachSet& b, bool two_sided) {
  require_aligned(a, b);
  const std::size_t n = a.breached.size();
  if (n < 2) throw InsufficientDataError("paired t-test needs >= 2 dates");

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += static_cast<double>(a.breached[i]) -
           static_cast<double>(b.breached[i]);
  }
  const double nd = static_cast<double>(n);
  const double mean = sum / nd;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.breached[i]) -
                     static_cast<double>(b.breached[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (nd - 1.0));
  if (sd == 0.0) return 1.0;  // no evidence of a difference
  const double t = mean * std::sqrt(nd) / sd;
  if (two_sided) return student_t_two_sided_p(t, nd - 1.0);
  return 1.0 - student_t_cdf(t, nd - 1.0);
}

std::optional<double> dominance(const BreachSet& a, const BreachSet& b) {
  require_aligned(a, b);
  int a_count = 0;
  int shared = 0;
  for (std::size_t i = 0; i < a.breached.size(); ++i) {
    if (a.breached[i]) {
      ++a_count;
      if (b.breached[i]) ++shared;
    }
  }
  if (a_count == 0) return std::nullopt;
  return static_cast<double>(shared) / static_cast<double>(a_count) - 1.0;
}

std::vector<BreachPanel> build_breach_panels(
    const std::vector<BreachRecord>& records) {
  struct Key {
    double level;
    std::string asset;
    bool operator<(const Key& other) const {
      if (level != other.level) return level < other.level;
      return asset < other.asset;
    }
  };
  std::map<Key, std::map<std::string, std::vector<BreachRecord>>> grouped;
  std::vector<Key> key_order;
  std::vector<std::string> model_order;
  for (const BreachRecord& rec : records) {
    const Key key{rec.level, rec.asset};
    auto [it, inserted] = grouped.try_emplace(key);
    if (inserted) key_order.push_back(key);
    if (it->second.try_emplace(rec.model).second) {
      if (std::find(model_order.begin(), model_order.end(), rec.model) ==
          model_order.end()) {
        model_order.push_back(rec.model);
      }
    }
    it->second[rec.model].push_back(rec);
  }
  std::sort(key_order.begin(), key_order.end());

  std::vector<BreachPanel> panels;
  for (const Key& key : key_order) {
    BreachPanel panel;
    panel.level = key.level;
    panel.asset = key.asset;
    for (const std::string& model : model_order) {
      auto it = grouped[key].find(model);
      if (it == grouped[key].end()) continue;
      std::vector<BreachRecord> recs = it->second;
      std::sort(recs.begin(), recs.end(),
                [](const BreachRecord& x, const BreachRecord& y) {
                  return x.date < y.date;
                });
      BreachSet set;
      set.model = model;
      for (const BreachRecord& rec : recs) {
        set.dates.push_back(rec.date);
        set.breached.push_back(rec.breached ? 1 : 0);
      }
      panel.sets.push_back(std::move(set));
      panel.records.push_back(std::move(recs));
    }
    panels.push_back(std::move(panel));
  }
  return panels;
}

ComparisonReport comparison_matrix(const std::vector<BreachPanel>& panels,
                                   bool two_sided, bool raw_loss_costs) {
  ComparisonReport report;
  for (const BreachPanel& panel : panels) {
    if (panel.sets.size() < 2)
      throw ConfigError("comparison needs at least two models per panel");
    PanelReport out;
    out.level = panel.level;
    out.asset = panel.asset;
    out.observations = static_cast<int>(panel.sets.front().dates.size());

    double years = 1.0;
    if (out.observations >= 2) {
      const double span_days =
          static_cast<double>(panel.sets.front().dates.back().serial -
                              panel.sets.front().dates.front().serial);
      years = std::max(span_days / 365.25, 1e-9);
    }

    const std::size_t m = panel.sets.size();
    out.cells.assign(m, std::vector<ComparisonCell>(m));
    for (std::size_t i = 0; i < m; ++i) {
      const BreachSet& set = panel.sets[i];
      out.models.push_back(set.model);
      out.breach_counts.push_back(set.count());
      out.breach_rates.push_back(
          out.observations > 0
              ? static_cast<double>(set.count()) / out.observations
              : 0.0);
      out.costs.push_back(
          breach_costs(panel.records[i], years, raw_loss_costs));
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        ComparisonCell cell;
        cell.comp = comp_value(set, panel.sets[j]);
        cell.pvalue = paired_t_test(set, panel.sets[j], two_sided);
        cell.dom = dominance(set, panel.sets[j]);
        out.cells[i][j] = cell;
      }
    }
    report.panels.push_back(std::move(out));
  }
  return report;
}

CompTotals comp_totals(
    const std::vector<std::pair<BreachSet, BreachSet>>& pairs) {
  CompTotals totals;
  for (const auto& [a, b] : pairs) {
    totals.group_a += comp_value(a, b);
    totals.group_b += comp_value(b, a);
    ++totals.pairs;
  }
  return totals;
}

}  // namespace regimevar
