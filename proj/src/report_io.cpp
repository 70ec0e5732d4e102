#include "regimevar/report_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "regimevar/errors.hpp"
#include "regimevar/rng.hpp"

namespace regimevar {

std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

namespace {

std::vector<std::string> split_fields(const std::string& line,
                                      char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, delimiter)) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  return fields;
}

double parse_double_field(const std::string& text, long line_number) {
  double value = 0.0;
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size())
    throw ParseError("row " + std::to_string(line_number) +
                     ": unparsable number '" + text + "'");
  return value;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_var_estimates_csv(const std::string& path,
                             const BacktestResult& result, char delimiter) {
  std::ofstream out = open_for_write(path);
  out << "date" << delimiter << "model" << delimiter << "asset" << delimiter
      << "level" << delimiter << "threshold\n";
  for (const VarEstimate& est : result.estimates) {
    out << format_date(est.date) << delimiter << est.model << delimiter
        << est.asset << delimiter << format_double(est.level) << delimiter
        << format_double(est.threshold) << "\n";
  }
}

void write_breach_records_csv(const std::string& path,
                              const BacktestResult& result, char delimiter) {
  std::ofstream out = open_for_write(path);
  out << "date" << delimiter << "model" << delimiter << "asset" << delimiter
      << "level" << delimiter << "threshold" << delimiter << "realized"
      << delimiter << "breached" << delimiter << "excess\n";
  for (const BreachRecord& rec : result.records) {
    out << format_date(rec.date) << delimiter << rec.model << delimiter
        << rec.asset << delimiter << format_double(rec.level) << delimiter
        << format_double(rec.threshold) << delimiter
        << format_double(rec.realized) << delimiter << (rec.breached ? 1 : 0)
        << delimiter << format_double(rec.excess) << "\n";
  }
}

std::vector<BreachRecord> read_breach_records_csv(const std::string& path,
                                                  char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw DataError("result file '" + path + "' is empty");
  const std::vector<std::string> header = split_fields(line, delimiter);
  const std::vector<std::string> expected{"date",      "model",   "asset",
                                          "level",     "threshold",
                                          "realized",  "breached", "excess"};
  if (header != expected)
    throw SchemaError("result file '" + path + "' has an unexpected header");

  std::vector<BreachRecord> records;
  long line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line, delimiter);
    if (fields.size() != expected.size())
      throw DataError("row " + std::to_string(line_number) +
                      ": wrong field count");
    BreachRecord rec;
    rec.date = parse_date(fields[0]);
    rec.model = fields[1];
    rec.asset = fields[2];
    rec.level = parse_double_field(fields[3], line_number);
    rec.threshold = parse_double_field(fields[4], line_number);
    rec.realized = parse_double_field(fields[5], line_number);
    rec.breached = fields[6] == "1";
    rec.excess = parse_double_field(fields[7], line_number);
    records.push_back(rec);
  }
  return records;
}

void write_stats_csv(const std::string& path, const StatsSummary& summary,
                     char delimiter) {
  std::ofstream out = open_for_write(path);
  out << "asset" << delimiter << "count" << delimiter << "mean" << delimiter
      << "stddev" << delimiter << "skewness" << delimiter << "min";
  for (const auto& [level, value] : summary.assets.front().quantiles) {
    out << delimiter << "q" << format_double(level);
  }
  out << delimiter << "max\n";
  for (const AssetStats& stats : summary.assets) {
    out << stats.name << delimiter << stats.count << delimiter
        << format_double(stats.mean) << delimiter << format_double(stats.stddev)
        << delimiter << format_double(stats.skewness) << delimiter
        << format_double(stats.min);
    for (const auto& [level, value] : stats.quantiles) {
      out << delimiter << format_double(value);
    }
    out << delimiter << format_double(stats.max) << "\n";
  }
}

nlohmann::json stats_to_json(const StatsSummary& summary) {
  nlohmann::json assets = nlohmann::json::array();
  for (const AssetStats& stats : summary.assets) {
    nlohmann::json quantiles = nlohmann::json::object();
    for (const auto& [level, value] : stats.quantiles) {
      quantiles[format_double(level)] = value;
    }
    assets.push_back(nlohmann::json{{"asset", stats.name},
                                    {"count", stats.count},
                                    {"mean", stats.mean},
                                    {"stddev", stats.stddev},
                                    {"skewness", stats.skewness},
                                    {"min", stats.min},
                                    {"max", stats.max},
                                    {"quantiles", std::move(quantiles)}});
  }
  return nlohmann::json{
      {"frequency",
       summary.frequency == Frequency::Daily ? "daily" : "weekly"},
      {"assets", std::move(assets)}};
}

std::string stats_to_text(const StatsSummary& summary) {
  std::ostringstream out;
  out << (summary.frequency == Frequency::Daily ? "Daily" : "Weekly")
      << " descriptive statistics\n";
  char buf[64];
  for (const AssetStats& stats : summary.assets) {
    out << "  " << stats.name << ": count=" << stats.count;
    std::snprintf(buf, sizeof(buf), " mean=%.6g sd=%.6g skew=%.4g",
                  stats.mean, stats.stddev, stats.skewness);
    out << buf;
    std::snprintf(buf, sizeof(buf), " min=%.6g max=%.6g", stats.min,
                  stats.max);
    out << buf << "\n    quantiles:";
    for (const auto& [level, value] : stats.quantiles) {
      std::snprintf(buf, sizeof(buf), " %g%%=%.6g", level * 100.0, value);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

void write_comparison_csv(const std::string& path,
                          const ComparisonReport& report, char delimiter) {
  std::ofstream out = open_for_write(path);
  out << "level" << delimiter << "asset" << delimiter << "model" << delimiter
      << "peer" << delimiter << "breaches" << delimiter << "perc" << delimiter
      << "comp" << delimiter << "pvalue" << delimiter << "dom" << delimiter
      << "acc_loss_per_year" << delimiter << "avg_loss_per_breach\n";
  for (const PanelReport& panel : report.panels) {
    for (std::size_t i = 0; i < panel.models.size(); ++i) {
      // one summary row per model, then one row per peer comparison
      out << format_double(panel.level) << delimiter << panel.asset
          << delimiter << panel.models[i] << delimiter << "" << delimiter
          << panel.breach_counts[i] << delimiter
          << format_double(panel.breach_rates[i]) << delimiter << ""
          << delimiter << "" << delimiter << "" << delimiter
          << format_double(panel.costs[i].accumulated_per_year) << delimiter
          << (panel.costs[i].average_per_breach
                  ? format_double(*panel.costs[i].average_per_breach)
                  : "")
          << "\n";
      for (std::size_t j = 0; j < panel.models.size(); ++j) {
        if (i == j) continue;
        const ComparisonCell& cell = panel.cells[i][j];
        out << format_double(panel.level) << delimiter << panel.asset
            << delimiter << panel.models[i] << delimiter << panel.models[j]
            << delimiter << "" << delimiter << "" << delimiter
            << format_double(cell.comp) << delimiter
            << format_double(cell.pvalue) << delimiter
            << (cell.dom ? format_double(*cell.dom) : "") << delimiter << ""
            << delimiter << "" << "\n";
      }
    }
  }
}

nlohmann::json comparison_to_json(const ComparisonReport& report) {
  nlohmann::json panels = nlohmann::json::array();
  for (const PanelReport& panel : report.panels) {
    nlohmann::json models = nlohmann::json::array();
    for (std::size_t i = 0; i < panel.models.size(); ++i) {
      nlohmann::json peers = nlohmann::json::object();
      for (std::size_t j = 0; j < panel.models.size(); ++j) {
        if (i == j) continue;
        const ComparisonCell& cell = panel.cells[i][j];
        nlohmann::json entry{{"comp", cell.comp}, {"pvalue", cell.pvalue}};
        if (cell.dom) entry["dom"] = *cell.dom;
        peers[panel.models[j]] = std::move(entry);
      }
      nlohmann::json model{{"model", panel.models[i]},
                           {"breaches", panel.breach_counts[i]},
                           {"perc", panel.breach_rates[i]},
                           {"acc_loss_per_year",
                            panel.costs[i].accumulated_per_year},
                           {"peers", std::move(peers)}};
      if (panel.costs[i].average_per_breach)
        model["avg_loss_per_breach"] = *panel.costs[i].average_per_breach;
      models.push_back(std::move(model));
    }
    panels.push_back(nlohmann::json{{"level", panel.level},
                                    {"asset", panel.asset},
                                    {"observations", panel.observations},
                                    {"models", std::move(models)}});
  }
  return nlohmann::json{{"panels", std::move(panels)}};
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for hashing");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  nlohmann::json config = nlohmann::json::array();
  for (const auto& [key, value] : manifest.config) {
    config.push_back(nlohmann::json{{"key", key}, {"value", value}});
  }
  nlohmann::json digests = nlohmann::json::array();
  for (const auto& [file, digest] : manifest.input_digests) {
    digests.push_back(nlohmann::json{{"file", file}, {"digest", digest}});
  }
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& [stage, ms] : manifest.timings_ms) {
    timings.push_back(nlohmann::json{{"stage", stage}, {"ms", ms}});
  }
  return nlohmann::json{{"command", manifest.command},
                        {"artifact_version", manifest.artifact_version},
                        {"seed", manifest.seed},
                        {"config", std::move(config)},
                        {"input_digests", std::move(digests)},
                        {"timings_ms", std::move(timings)}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest manifest;
  manifest.command = j.at("command").get<std::string>();
  manifest.artifact_version = j.at("artifact_version").get<std::string>();
  manifest.seed = j.at("seed").get<std::uint64_t>();
  for (const nlohmann::json& item : j.at("config")) {
    manifest.config.emplace_back(item.at("key").get<std::string>(),
                                 item.at("value").get<std::string>());
  }
  for (const nlohmann::json& item : j.at("input_digests")) {
    manifest.input_digests.emplace_back(item.at("file").get<std::string>(),
                                        item.at("digest").get<std::string>());
  }
  for (const nlohmann::json& item : j.at("timings_ms")) {
    manifest.timings_ms.emplace_back(item.at("stage").get<std::string>(),
                                     item.at("ms").get<double>());
  }
  return manifest;
}

void save_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << manifest_to_json(manifest).dump(2) << "\n";
}

}  // namespace regimevar
