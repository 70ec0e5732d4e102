#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "regimevar/backtest.hpp"
#include "regimevar/evaluate.hpp"
#include "regimevar/market_data.hpp"

namespace regimevar {

/// Shortest round-trip decimal representation; used everywhere numbers
/// are written so re-runs are byte-identical.
std::string format_double(double v);

void write_var_estimates_csv(const std::string& path,
                             const BacktestResult& result,
                             char delimiter = ',');
void write_breach_records_csv(const std::string& path,
                              const BacktestResult& result,
                              char delimiter = ',');

std::vector<BreachRecord> read_breach_records_csv(const std::string& path,
                                                  char delimiter = ',');

void write_stats_csv(const std::string& path, const StatsSummary& summary,
                     char delimiter = ',');
nlohmann::json stats_to_json(const StatsSummary& summary);
std::string stats_to_text(const StatsSummary& summary);

void write_comparison_csv(const std::string& path,
                          const ComparisonReport& report,
                          char delimiter = ',');
nlohmann::json comparison_to_json(const ComparisonReport& report);

/// FNV-1a 64-bit digest of a file's bytes, hex-encoded.
std::string file_digest(const std::string& path);

/// Everything needed to reproduce a run: resolved configuration, master
/// seed, input digests, artifact version and per-stage timings.
struct RunManifest {
  std::string command;
  std::string artifact_version;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // key = value
  std::vector<std::pair<std::string, std::string>> input_digests;
  std::vector<std::pair<std::string, double>> timings_ms;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace regimevar
