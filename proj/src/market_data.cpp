#include "regimevar/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "regimevar/errors.hpp"
#include "regimevar/stats.hpp"

namespace regimevar {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, delimiter)) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    // trim surrounding spaces
    const auto first = field.find_first_not_of(" \t");
    const auto last = field.find_last_not_of(" \t");
    fields.push_back(first == std::string::npos
                         ? std::string()
                         : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == delimiter) fields.emplace_back();
  return fields;
}

}  // namespace

PriceSeries load_price_series(const std::string& path,
                              const LoadSchema& schema) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open input file '" + path + "'");

  std::string header_line;
  if (!std::getline(file, header_line))
    throw SchemaError("input file '" + path + "' is empty");
  const std::vector<std::string> header =
      split_line(header_line, schema.delimiter);
  if (header.size() < 2)
    throw SchemaError("input needs a date column plus at least one level column");

  auto column_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw SchemaError("column '" + name + "' not found in input header");
  };

  const int date_col =
      schema.date_column.empty() ? 0 : column_index(schema.date_column);

  std::vector<int> level_cols;
  std::vector<std::string> asset_names;
  if (schema.level_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (static_cast<int>(i) == date_col) continue;
      level_cols.push_back(static_cast<int>(i));
      asset_names.push_back(header[i]);
    }
  } else {
    for (const std::string& name : schema.level_columns) {
      level_cols.push_back(column_index(name));
      asset_names.push_back(name);
    }
  }
  if (level_cols.empty())
    throw SchemaError("no level columns selected from input header");

  struct Row {
    Date date;
    std::vector<double> levels;
  };
  std::vector<Row> rows;
  std::string line;
  long line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_line(line, schema.delimiter);
    if (fields.size() != header.size()) {
      throw DataError("row " + std::to_string(line_number) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    Row row;
    try {
      row.date = parse_date(fields[date_col]);
    } catch (const ParseError& e) {
      throw ParseError("row " + std::to_string(line_number) + ": " + e.what());
    }
    if (is_weekend(row.date)) {
      throw DataError("row " + std::to_string(line_number) + ": " +
                      format_date(row.date) + " is not a business day");
    }
    for (std::size_t j = 0; j < level_cols.size(); ++j) {
      const std::string& cell = fields[level_cols[j]];
      if (cell.empty()) {
        throw DataError("row " + std::to_string(line_number) +
                        ": missing level for asset '" + asset_names[j] + "'");
      }
      std::size_t consumed = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(line_number) +
                         ": unparsable level '" + cell + "'");
      }
      if (consumed != cell.size()) {
        throw ParseError("row " + std::to_string(line_number) +
                         ": unparsable level '" + cell + "'");
      }
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw DataError("row " + std::to_string(line_number) +
                        ": non-positive level " + cell + " for asset '" +
                        asset_names[j] + "'");
      }
      row.levels.push_back(value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InsufficientDataError("input has no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) {
      throw DataError("duplicate date " + format_date(rows[i].date));
    }
  }

  PriceSeries series;
  series.asset_names = std::move(asset_names);
  series.dates.reserve(rows.size());
  series.levels.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(level_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    series.dates.push_back(rows[i].date);
    for (std::size_t j = 0; j < rows[i].levels.size(); ++j) {
      series.levels(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(j)) = rows[i].levels[j];
    }
  }
  return series;
}

ReturnSeries compute_returns(const PriceSeries& prices) {
  const Eigen::Index rows = prices.rows();
  if (rows < 2)
    throw InsufficientDataError("need at least 2 price rows to form returns");
  ReturnSeries series;
  series.frequency = Frequency::Daily;
  series.asset_names = prices.asset_names;
  series.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  series.returns =
      (prices.levels.bottomRows(rows - 1).array() /
           prices.levels.topRows(rows - 1).array() -
       1.0)
          .matrix();
  return series;
}

WeeklyAggregate aggregate_weekly(const ReturnSeries& daily) {
  if (daily.frequency != Frequency::Daily)
    throw ConfigError("weekly aggregation expects a daily series");
  if (daily.rows() == 0)
    throw InsufficientDataError("cannot aggregate an empty series");

  const Eigen::Index n = daily.assets();
  std::vector<Date> week_dates;
  std::vector<Eigen::VectorXd> week_returns;

  Date current_friday = friday_of_week(daily.dates[0]);
  Date label = daily.dates[0];
  Eigen::VectorXd compounded = Eigen::VectorXd::Ones(n);
  bool open = false;

  auto flush = [&]() {
    if (!open) return;
    week_dates.push_back(label);
    week_returns.push_back(compounded.array() - 1.0);
    compounded.setOnes();
    open = false;
  };

  for (Eigen::Index t = 0; t < daily.rows(); ++t) {
    const Date d = daily.dates[t];
    const Date friday = friday_of_week(d);
    if (open && friday != current_friday) flush();
    current_friday = friday;
    label = d;
    compounded.array() *= (1.0 + daily.returns.row(t).array());
    open = true;
  }
  flush();

  WeeklyAggregate out;
  out.weekly.frequency = Frequency::Weekly;
  out.weekly.asset_names = daily.asset_names;
  out.weekly.dates = week_dates;
  out.weekly.returns.resize(static_cast<Eigen::Index>(week_returns.size()), n);
  for (std::size_t w = 0; w < week_returns.size(); ++w) {
    out.weekly.returns.row(static_cast<Eigen::Index>(w)) =
        week_returns[w].transpose();
  }

  // Calendar weeks inside the span that contributed no business days.
  const std::int32_t first_friday = friday_of_week(daily.dates.front()).serial;
  const std::int32_t last_friday = friday_of_week(daily.dates.back()).serial;
  const int weeks_spanned =
      static_cast<int>((last_friday - first_friday) / 7) + 1;
  out.skipped_weeks = weeks_spanned - static_cast<int>(week_dates.size());
  return out;
}

const std::vector<double>& stats_quantile_levels() {
  static const std::vector<double> levels{0.01, 0.05, 0.10, 0.25, 0.50,
                                          0.75, 0.90, 0.95, 0.99};
  return levels;
}

StatsSummary descriptive_stats(const ReturnSeries& series) {
  const Eigen::Index rows = series.rows();
  if (rows < 3)
    throw InsufficientDataError("descriptive stats need >= 3 observations");

  StatsSummary summary;
  summary.frequency = series.frequency;
  for (Eigen::Index j = 0; j < series.assets(); ++j) {
    AssetStats stats;
    stats.name = j < static_cast<Eigen::Index>(series.asset_names.size())
                     ? series.asset_names[j]
                     : "asset" + std::to_string(j);
    const Eigen::VectorXd column = series.returns.col(j);
    stats.count = static_cast<long>(rows);
    stats.mean = column.mean();
    const double var =
        (column.array() - stats.mean).square().sum() /
        static_cast<double>(rows - 1);
    stats.stddev = std::sqrt(var);
    stats.skewness = sample_skewness(column);
    stats.min = column.minCoeff();
    stats.max = column.maxCoeff();
    std::vector<double> sorted(column.data(), column.data() + rows);
    std::sort(sorted.begin(), sorted.end());
    for (double level : stats_quantile_levels()) {
      stats.quantiles.emplace_back(level, quantile_sorted(sorted, level));
    }
    summary.assets.push_back(std::move(stats));
  }
  return summary;
}

}  // namespace regimevar
