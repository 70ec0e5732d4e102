#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "regimevar/errors.hpp"
#include "regimevar/evaluate.hpp"
#include "regimevar/stats.hpp"

using namespace regimevar;

namespace {

BreachSet make_set(const std::string& model, int n_dates,
                   const std::vector<int>& breach_indices) {
  BreachSet set;
  set.model = model;
  set.dates = testutil::business_days(make_date(2001, 1, 1), n_dates);
  set.breached.assign(static_cast<std::size_t>(n_dates), 0);
  for (int i : breach_indices) set.breached[static_cast<std::size_t>(i)] = 1;
  return set;
}

BreachSet with_count(const std::string& model, int n_dates, int breaches) {
  std::vector<int> idx;
  for (int i = 0; i < breaches; ++i) idx.push_back(i);
  return make_set(model, n_dates, idx);
}

}  // namespace

TEST_CASE("comp_value orders by breach count") {
  const BreachSet hmm = with_count("hmm", 1197, 16);
  const BreachSet classic = with_count("classic", 1197, 26);
  CHECK(comp_value(hmm, classic) == doctest::Approx(1.0));
  CHECK(comp_value(classic, hmm) == doctest::Approx(0.0));
  CHECK(comp_value(hmm, with_count("other", 1197, 16)) ==
        doctest::Approx(0.5));

  const BreachSet short_cal = with_count("short", 10, 1);
  CHECK_THROWS_AS(comp_value(hmm, short_cal), DataError);
}

TEST_CASE("paired t-test") {
  SUBCASE("identical indicator series give p = 1") {
    const BreachSet a = make_set("a", 50, {3, 7, 20});
    const BreachSet b = make_set("b", 50, {3, 7, 20});
    CHECK(paired_t_test(a, b) == doctest::Approx(1.0));
  }
  SUBCASE("thirty one-sided breaches out of 1000 are significant") {
    std::vector<int> idx;
    for (int i = 0; i < 30; ++i) idx.push_back(i * 30);
    const BreachSet a = make_set("a", 1000, idx);
    const BreachSet b = make_set("b", 1000, {});
    const double p = paired_t_test(a, b);
    CHECK(p < 0.01);
    // closed-form cross-check: t = mean * sqrt(N) / sd
    const double mean = 0.03;
    const double sd = std::sqrt(30.0 * (1.0 - 0.03) * (1.0 - 0.03) / 999.0 +
                                970.0 * 0.03 * 0.03 / 999.0);
    const double t = mean * std::sqrt(1000.0) / sd;
    CHECK(t > 5.0);
    CHECK(p == doctest::Approx(student_t_two_sided_p(t, 999.0)).epsilon(1e-12));
  }
  SUBCASE("five-date hand example") {
    const BreachSet a = make_set("a", 5, {0});
    const BreachSet b = make_set("b", 5, {});
    // d = (1,0,0,0,0): t = 1, two-sided p with 4 dof
    CHECK(paired_t_test(a, b) == doctest::Approx(0.3739010).epsilon(1e-6));
  }
  SUBCASE("p-values are symmetric") {
    const BreachSet a = make_set("a", 40, {1, 5, 9});
    const BreachSet b = make_set("b", 40, {2, 5});
    CHECK(paired_t_test(a, b) == paired_t_test(b, a));
  }
  SUBCASE("one-sided variant halves the symmetric tail") {
    const BreachSet a = make_set("a", 40, {1, 5, 9, 11});
    const BreachSet b = make_set("b", 40, {2});
    const double two = paired_t_test(a, b, true);
    const double one = paired_t_test(a, b, false);
    CHECK(one == doctest::Approx(two / 2.0).epsilon(1e-9));
  }
}

TEST_CASE("dominance") {
  SUBCASE("subset gives zero") {
    const BreachSet a = make_set("a", 30, {3, 8});
    const BreachSet b = make_set("b", 30, {3, 8, 15});
    REQUIRE(dominance(a, b).has_value());
    CHECK(*dominance(a, b) == doctest::Approx(0.0));
  }
  SUBCASE("partial overlap") {
    const BreachSet a = make_set("a", 30, {1, 2, 3});
    const BreachSet b = make_set("b", 30, {2, 3});
    CHECK(*dominance(a, b) == doctest::Approx(-1.0 / 3.0));
  }
  SUBCASE("disjoint sets give minus one") {
    const BreachSet a = make_set("a", 30, {1, 2});
    const BreachSet b = make_set("b", 30, {10, 11});
    CHECK(*dominance(a, b) == doctest::Approx(-1.0));
  }
  SUBCASE("no breaches means absent") {
    const BreachSet a = make_set("a", 30, {});
    const BreachSet b = make_set("b", 30, {1});
    CHECK_FALSE(dominance(a, b).has_value());
  }
  SUBCASE("dom stays within [-1, 0]") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> ia, ib;
      for (int i = 0; i < 25; ++i) {
        if (rng.uniform() < 0.3) ia.push_back(i);
        if (rng.uniform() < 0.3) ib.push_back(i);
      }
      if (ia.empty()) ia.push_back(0);
      const auto dom = dominance(make_set("a", 25, ia), make_set("b", 25, ib));
      REQUIRE(dom.has_value());
      CHECK(*dom <= 0.0);
      CHECK(*dom >= -1.0);
    }
  }
}

TEST_CASE("full dominance = dom 0 with comp 1 implies strict inclusion") {
  const BreachSet a = make_set("a", 50, {5, 10});
  const BreachSet b = make_set("b", 50, {5, 10, 22});
  CHECK(comp_value(a, b) == doctest::Approx(1.0));
  CHECK(*dominance(a, b) == doctest::Approx(0.0));
  // every a-breach date is a b-breach date, and b has strictly more
  const auto da = a.breach_dates();
  const auto db = b.breach_dates();
  for (const Date& d : da) {
    CHECK(std::find(db.begin(), db.end(), d) != db.end());
  }
  CHECK(db.size() > da.size());
}

TEST_CASE("comparison_matrix") {
  SUBCASE("two identical models tie everywhere") {
    std::vector<BreachPanel> panels(1);
    panels[0].level = 0.05;
    panels[0].asset = "equity";
    panels[0].sets = {make_set("m1", 40, {3, 9}), make_set("m2", 40, {3, 9})};
    panels[0].records.resize(2);
    for (int m = 0; m < 2; ++m) {
      for (int t = 0; t < 40; ++t) {
        BreachRecord rec;
        rec.date = panels[0].sets[m].dates[t];
        rec.model = panels[0].sets[m].model;
        rec.asset = "equity";
        rec.level = 0.05;
        rec.breached = panels[0].sets[m].breached[t] != 0;
        rec.excess = rec.breached ? -0.01 : 0.02;
        panels[0].records[m].push_back(rec);
      }
    }
    const ComparisonReport report = comparison_matrix(panels);
    const PanelReport& panel = report.panels[0];
    CHECK(panel.cells[0][1].comp == doctest::Approx(0.5));
    CHECK(panel.cells[0][1].pvalue == doctest::Approx(1.0));
    CHECK(*panel.cells[0][1].dom == doctest::Approx(0.0));
    CHECK(panel.breach_counts[0] == 2);
    REQUIRE(panel.costs[0].average_per_breach.has_value());
    CHECK(*panel.costs[0].average_per_breach == doctest::Approx(-0.01));
  }
  SUBCASE("nested breach sets order transitively") {
    std::vector<BreachPanel> panels(1);
    panels[0].level = 0.01;
    panels[0].asset = "equity";
    panels[0].sets = {make_set("small", 60, {1}),
                      make_set("mid", 60, {1, 2}),
                      make_set("big", 60, {1, 2, 3})};
    panels[0].records.resize(3);
    for (int m = 0; m < 3; ++m) {
      for (int t = 0; t < 60; ++t) {
        BreachRecord rec;
        rec.date = panels[0].sets[m].dates[t];
        rec.model = panels[0].sets[m].model;
        rec.breached = panels[0].sets[m].breached[t] != 0;
        panels[0].records[m].push_back(rec);
      }
    }
    const ComparisonReport report = comparison_matrix(panels);
    const PanelReport& panel = report.panels[0];
    CHECK(panel.cells[0][1].comp == doctest::Approx(1.0));
    CHECK(panel.cells[1][2].comp == doctest::Approx(1.0));
    CHECK(panel.cells[0][2].comp == doctest::Approx(1.0));
    CHECK(*panel.cells[0][1].dom == doctest::Approx(0.0));
    CHECK(*panel.cells[1][2].dom == doctest::Approx(0.0));
  }
  SUBCASE("comp antisymmetry across random panels") {
    Rng rng(5);
    std::vector<BreachPanel> panels(1);
    panels[0].level = 0.05;
    panels[0].asset = "bond";
    for (int m = 0; m < 4; ++m) {
      std::vector<int> idx;
      for (int i = 0; i < 30; ++i) {
        if (rng.uniform() < 0.2) idx.push_back(i);
      }
      panels[0].sets.push_back(make_set("m" + std::to_string(m), 30, idx));
      std::vector<BreachRecord> recs;
      for (int t = 0; t < 30; ++t) {
        BreachRecord rec;
        rec.date = panels[0].sets.back().dates[t];
        rec.breached = panels[0].sets.back().breached[t] != 0;
        recs.push_back(rec);
      }
      panels[0].records.push_back(recs);
    }
    const ComparisonReport report = comparison_matrix(panels);
    const PanelReport& panel = report.panels[0];
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        if (i == j) continue;
        CHECK(panel.cells[i][j].comp + panel.cells[j][i].comp ==
              doctest::Approx(1.0));
        CHECK(panel.cells[i][j].pvalue ==
              doctest::Approx(panel.cells[j][i].pvalue));
      }
    }
  }
}

TEST_CASE("build_breach_panels groups by level and asset") {
  std::vector<BreachRecord> records;
  for (const std::string& model : {"classic", "hmm"}) {
    for (double level : {0.01, 0.05}) {
      for (int t = 0; t < 10; ++t) {
        BreachRecord rec;
        rec.date = testutil::business_days(make_date(2010, 1, 4), 10)[t];
        rec.model = model;
        rec.asset = "equity";
        rec.level = level;
        rec.breached = (model == "classic" && t == 3);
        records.push_back(rec);
      }
    }
  }
  const auto panels = build_breach_panels(records);
  REQUIRE(panels.size() == 2);
  CHECK(panels[0].level == doctest::Approx(0.01));
  CHECK(panels[1].level == doctest::Approx(0.05));
  REQUIRE(panels[0].sets.size() == 2);
  CHECK(panels[0].sets[0].model == "classic");
  CHECK(panels[0].sets[0].count() == 1);
  CHECK(panels[0].sets[1].count() == 0);
}

TEST_CASE("comp totals follow the paired-group scheme") {
  // 3 network types x 4 regions, long-window models vs short-window models
  std::vector<std::pair<BreachSet, BreachSet>> pairs;
  int tag = 0;
  for (int network = 0; network < 3; ++network) {
    for (int region = 0; region < 4; ++region) {
      const std::string suffix =
          "_" + std::to_string(network) + "_" + std::to_string(region);
      // long window strictly better except one tie and one loss
      int long_breaches = 5;
      int short_breaches = 9;
      if (tag == 5) short_breaches = 5;   // tie
      if (tag == 10) short_breaches = 3;  // short window wins
      pairs.emplace_back(with_count("w2000" + suffix, 100, long_breaches),
                         with_count("w1000" + suffix, 100, short_breaches));
      ++tag;
    }
  }
  const CompTotals totals = comp_totals(pairs);
  CHECK(totals.pairs == 12);
  // 10 wins + 1 tie (0.5) + 1 loss (0.0)
  CHECK(totals.group_a == doctest::Approx(10.5));
  CHECK(totals.group_b == doctest::Approx(1.5));
  CHECK(totals.group_a + totals.group_b == doctest::Approx(12.0));
}
