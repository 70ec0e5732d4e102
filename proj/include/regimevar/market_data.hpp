#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "regimevar/dates.hpp"

namespace regimevar {

enum class Frequency { Daily, Weekly };

/// Dated multi-asset total-return-index levels. Dates are strictly
/// increasing business days and every level is strictly positive; rows
/// with gaps are rejected at load.
struct PriceSeries {
  std::vector<Date> dates;
  Eigen::MatrixXd levels;  // [T x n]
  std::vector<std::string> asset_names;

  Eigen::Index rows() const { return levels.rows(); }
  Eigen::Index assets() const { return levels.cols(); }
};

/// Simple returns derived from a PriceSeries (or aggregated weekly).
/// Every return is > -1.
struct ReturnSeries {
  std::vector<Date> dates;
  Eigen::MatrixXd returns;  // [T x n]
  Frequency frequency = Frequency::Daily;
  std::vector<std::string> asset_names;

  Eigen::Index rows() const { return returns.rows(); }
  Eigen::Index assets() const { return returns.cols(); }
};

struct LoadSchema {
  char delimiter = ',';
  std::string date_column;                 // empty: first column
  std::vector<std::string> level_columns;  // empty: all remaining columns
};

PriceSeries load_price_series(const std::string& path,
                              const LoadSchema& schema = {});

ReturnSeries compute_returns(const PriceSeries& prices);

struct WeeklyAggregate {
  ReturnSeries weekly;
  int skipped_weeks = 0;  // calendar weeks in range with no business days
};

/// Compounds daily returns into business weeks; a week's label date is its
/// last business day on or before Friday.
WeeklyAggregate aggregate_weekly(const ReturnSeries& daily);

struct AssetStats {
  std::string name;
  long count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double skewness = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (level, value)
};

struct StatsSummary {
  Frequency frequency = Frequency::Daily;
  std::vector<AssetStats> assets;
};

const std::vector<double>& stats_quantile_levels();
StatsSummary descriptive_stats(const ReturnSeries& series);

}  // namespace regimevar
