#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "regimevar/backtest.hpp"
#include "regimevar/errors.hpp"
#include "regimevar/evaluate.hpp"
#include "regimevar/market_data.hpp"
#include "regimevar/report_io.hpp"
#include "regimevar/serialize.hpp"
#include "regimevar/stats.hpp"

namespace {

using namespace regimevar;

constexpr const char* kArtifactVersion = "regimevar 0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream stream(text);
  while (std::getline(stream, part, sep)) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

// Flat key = value configuration with [model.NAME] sections.
struct IniData {
  std::vector<std::pair<std::string, std::string>> globals;
  std::vector<std::pair<std::string,
                        std::vector<std::pair<std::string, std::string>>>>
      sections;
};

IniData parse_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  IniData data;
  std::string current_section;
  std::string line;
  long line_number = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    const auto last = s.find_last_not_of(" \t\r");
    return first == std::string::npos ? std::string()
                                      : s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ConfigError("config line " + std::to_string(line_number) +
                          ": unterminated section header");
      current_section = trim(text.substr(1, text.size() - 2));
      data.sections.emplace_back(current_section,
                                 std::vector<std::pair<std::string,
                                                       std::string>>{});
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (current_section.empty()) {
      data.globals.emplace_back(key, value);
    } else {
      data.sections.back().second.emplace_back(key, value);
    }
  }
  return data;
}

double to_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + value +
                      "'");
  }
}

long to_long(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + value +
                      "'");
  }
}

// Model token grammar: kind[+init][+reg[=w]], e.g. "lstm+init+reg".
ModelConfig parse_model_token(const std::string& token) {
  const std::vector<std::string> parts = split(token, '+');
  if (parts.empty()) throw ConfigError("empty model token");
  ModelConfig model;
  model.name = token;
  model.kind = parse_model_kind(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& flag = parts[i];
    if (flag == "init") {
      model.hmm_init = true;
    } else if (flag == "reg") {
      model.reg_weight = 1.0;
    } else if (flag.rfind("reg=", 0) == 0) {
      model.reg_weight = to_double(flag.substr(4), "reg");
    } else {
      throw ConfigError("unknown model flag '+" + flag + "' in '" + token +
                        "'");
    }
  }
  return model;
}

void apply_model_key(ModelConfig& model, const std::string& key,
                     const std::string& value) {
  if (key == "type") {
    model.kind = parse_model_kind(value);
  } else if (key == "init") {
    model.hmm_init = (value == "hmm");
    if (value != "hmm" && value != "random")
      throw ConfigError("model init must be 'hmm' or 'random'");
  } else if (key == "reg_weight") {
    model.reg_weight = to_double(value, key);
  } else if (key == "epochs") {
    model.epochs = static_cast<int>(to_long(value, key));
  } else if (key == "learning_rate") {
    model.learning_rate = to_double(value, key);
  } else if (key == "weight_decay") {
    model.weight_decay = to_double(value, key);
  } else if (key == "attempts") {
    model.attempts = static_cast<int>(to_long(value, key));
  } else if (key == "k") {
    model.k = static_cast<int>(to_long(value, key));
  } else if (key == "lookahead") {
    model.lookahead = static_cast<int>(to_long(value, key));
  } else if (key == "refit_stride") {
    model.refit_stride = static_cast<int>(to_long(value, key));
  } else if (key == "hmm_tol") {
    model.hmm_fit.tol = to_double(value, key);
  } else if (key == "hmm_max_iter") {
    model.hmm_fit.max_iter = static_cast<int>(to_long(value, key));
  } else if (key == "hmm_retries") {
    model.hmm_retries = static_cast<int>(to_long(value, key));
  } else {
    throw ConfigError("unknown model config key '" + key + "'");
  }
}

struct BacktestCli {
  std::string input;
  std::string config_file;
  std::string from_manifest;
  std::string models_flag;
  std::string levels_flag;
  std::string calendar_flag;
  std::string out_dir = ".";
  char delimiter = ',';
  int window = -1;
  int paths = -1;
  int horizon = -1;
  long long seed = -1;
  int threads = -1;
  bool save_models = false;
};

void apply_global_key(BacktestConfig& config, std::string& input,
                      const std::string& key, const std::string& value) {
  if (key == "input") {
    input = value;
  } else if (key == "window") {
    config.window_days = static_cast<int>(to_long(value, key));
  } else if (key == "paths") {
    config.paths = static_cast<int>(to_long(value, key));
  } else if (key == "horizon") {
    config.horizon_days = static_cast<int>(to_long(value, key));
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(to_long(value, key));
  } else if (key == "threads") {
    config.threads = static_cast<int>(to_long(value, key));
  } else if (key == "levels") {
    config.levels.clear();
    for (const std::string& level : split(value, ',')) {
      config.levels.push_back(to_double(level, key));
    }
  } else if (key == "calendar") {
    if (value == "weekly") {
      config.calendar = EvalCalendar::Weekly;
    } else if (value == "monthly") {
      config.calendar = EvalCalendar::Monthly;
    } else {
      throw ConfigError("calendar must be 'weekly' or 'monthly'");
    }
  } else if (key == "raw_loss_accounting") {
    config.raw_loss_accounting = (value == "true" || value == "1");
  } else if (key == "models") {
    config.models.clear();
    for (const std::string& token : split(value, ',')) {
      config.models.push_back(parse_model_token(token));
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// Resolved config as ordered key = value pairs; this is what the manifest
// snapshots and what --from-manifest replays.
std::vector<std::pair<std::string, std::string>> snapshot_config(
    const BacktestConfig& config, const std::string& input) {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.emplace_back("input", input);
  pairs.emplace_back("window", std::to_string(config.window_days));
  pairs.emplace_back("horizon", std::to_string(config.horizon_days));
  pairs.emplace_back("paths", std::to_string(config.paths));
  std::string levels;
  for (double level : config.levels) {
    if (!levels.empty()) levels += ",";
    levels += format_double(level);
  }
  pairs.emplace_back("levels", levels);
  pairs.emplace_back("calendar", config.calendar == EvalCalendar::Weekly
                                     ? "weekly"
                                     : "monthly");
  pairs.emplace_back("seed", std::to_string(config.seed));
  pairs.emplace_back(
      "raw_loss_accounting",
      config.raw_loss_accounting ? "true" : "false");
  for (const ModelConfig& model : config.models) {
    const std::string prefix = "model." + model.name + ".";
    pairs.emplace_back(prefix + "type", model_kind_name(model.kind));
    pairs.emplace_back(prefix + "init", model.hmm_init ? "hmm" : "random");
    pairs.emplace_back(prefix + "reg_weight",
                       format_double(model.reg_weight));
    pairs.emplace_back(prefix + "epochs", std::to_string(model.epochs));
    pairs.emplace_back(prefix + "learning_rate",
                       format_double(model.learning_rate));
    pairs.emplace_back(prefix + "weight_decay",
                       format_double(model.weight_decay));
    pairs.emplace_back(prefix + "attempts", std::to_string(model.attempts));
    pairs.emplace_back(prefix + "k", std::to_string(model.k));
    pairs.emplace_back(prefix + "lookahead",
                       std::to_string(model.lookahead));
    pairs.emplace_back(prefix + "refit_stride",
                       std::to_string(model.refit_stride));
    pairs.emplace_back(prefix + "hmm_tol", format_double(model.hmm_fit.tol));
    pairs.emplace_back(prefix + "hmm_max_iter",
                       std::to_string(model.hmm_fit.max_iter));
    pairs.emplace_back(prefix + "hmm_retries",
                       std::to_string(model.hmm_retries));
  }
  return pairs;
}

void apply_config_pairs(
    BacktestConfig& config, std::string& input,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::map<std::string, std::size_t> model_index;
  for (const auto& [key, value] : pairs) {
    if (key.rfind("model.", 0) == 0) {
      const auto dot = key.find('.', 6);
      if (dot == std::string::npos)
        throw ConfigError("malformed model key '" + key + "'");
      const std::string name = key.substr(6, dot - 6);
      const std::string field = key.substr(dot + 1);
      auto it = model_index.find(name);
      if (it == model_index.end()) {
        ModelConfig model;
        model.name = name;
        config.models.push_back(model);
        it = model_index.emplace(name, config.models.size() - 1).first;
      }
      apply_model_key(config.models[it->second], field, value);
    } else {
      apply_global_key(config, input, key, value);
    }
  }
}

ReturnSeries load_daily_returns(const std::string& input, char delimiter) {
  LoadSchema schema;
  schema.delimiter = delimiter;
  const PriceSeries prices = load_price_series(input, schema);
  return compute_returns(prices);
}

HmmParams fit_hmm_retry(const Eigen::Ref<const Eigen::MatrixXd>& window,
                        const ModelConfig& model, std::uint64_t seed) {
  for (int attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, 0x9E7, static_cast<std::uint64_t>(attempt)));
    try {
      return baum_welch(window, model.k, model.hmm_fit, rng).params;
    } catch (const RegimeCollapseError&) {
      if (attempt + 1 >= model.hmm_retries) throw;
    }
  }
}

ModelBundle build_bundle(const ReturnSeries& daily,
                         const BacktestConfig& config,
                         const ModelConfig& model, Date eval_date) {
  Eigen::Index end = -1;
  for (Eigen::Index t = 0; t < daily.rows(); ++t) {
    if (daily.dates[t] == eval_date) end = t;
  }
  if (end < config.window_days - 1)
    throw DataError("evaluation date not found in the input series");
  const auto window =
      daily.returns.middleRows(end - config.window_days + 1,
                               config.window_days);
  const std::uint64_t seed =
      derive_seed(config.seed, hash_string(model.name),
                  static_cast<std::uint64_t>(eval_date.serial));

  ModelBundle bundle;
  bundle.name = model.name;
  bundle.kind = model.kind;
  bundle.asset_names = daily.asset_names;
  switch (model.kind) {
    case ModelKind::Classic: {
      bundle.classic = fit_gaussian(window);
      break;
    }
    case ModelKind::Hmm: {
      bundle.hmm = fit_hmm_retry(window, model, seed);
      const SmoothedPath smoothed = forward_backward(*bundle.hmm, window);
      bundle.hmm_start =
          smoothed.probs.row(smoothed.probs.rows() - 1).transpose();
      break;
    }
    default: {
      BackboneSpec spec;
      spec.kind = model.kind == ModelKind::Ffn
                      ? BackboneKind::Ffn
                      : (model.kind == ModelKind::Tcn ? BackboneKind::Tcn
                                                      : BackboneKind::Lstm);
      TrainConfig train;
      train.window_days = config.window_days;
      train.attempts = model.attempts;
      train.epochs = model.epochs;
      train.learning_rate = model.learning_rate;
      train.weight_decay = model.weight_decay;
      train.reg_weight = model.reg_weight;
      train.k = model.k;
      train.lookahead = model.lookahead;
      train.seed = seed;
      std::optional<HmmParams> init;
      if (model.hmm_init)
        init = fit_hmm_retry(window, model, derive_seed(seed, 0x1417, 0));
      TrainReport report;
      RegimeNetModel net = train_regime_net(window, spec, train,
                                            init ? &*init : nullptr, &report);
      net.asset_names = daily.asset_names;
      bundle.report = std::move(report);
      // enough raw history to reseed the rolling receptive field
      const int tail =
          spec.kind == BackboneKind::Lstm
              ? config.window_days
              : std::min<int>(config.window_days, spec.receptive_field());
      bundle.history_tail = window.bottomRows(tail);
      bundle.net = std::move(net);
      break;
    }
  }
  return bundle;
}

// Two-observation series are too short for descriptive_stats (its
// skewness needs three points); report the remaining fields instead of
// refusing the whole panel.
StatsSummary reduced_stats(const ReturnSeries& series) {
  StatsSummary summary;
  summary.frequency = series.frequency;
  for (Eigen::Index j = 0; j < series.assets(); ++j) {
    AssetStats stats;
    stats.name = series.asset_names[static_cast<std::size_t>(j)];
    const Eigen::VectorXd column = series.returns.col(j);
    stats.count = static_cast<long>(series.rows());
    stats.mean = column.mean();
    stats.stddev = std::sqrt(
        (column.array() - stats.mean).square().sum() /
        static_cast<double>(series.rows() - 1));
    stats.skewness = std::numeric_limits<double>::quiet_NaN();
    stats.min = column.minCoeff();
    stats.max = column.maxCoeff();
    std::vector<double> sorted(column.data(), column.data() + series.rows());
    std::sort(sorted.begin(), sorted.end());
    for (double level : stats_quantile_levels()) {
      stats.quantiles.emplace_back(level, quantile_sorted(sorted, level));
    }
    summary.assets.push_back(std::move(stats));
  }
  return summary;
}

int cmd_stats(const std::string& input, char delimiter,
              const std::string& frequency, const std::string& format,
              const std::string& out_dir) {
  const ReturnSeries daily = load_daily_returns(input, delimiter);
  std::vector<StatsSummary> summaries;
  auto add_panel = [&](const ReturnSeries& series, const char* label) {
    if (series.rows() >= 3) {
      summaries.push_back(descriptive_stats(series));
    } else if (series.rows() == 2) {
      summaries.push_back(reduced_stats(series));
    } else {
      std::cerr << "note: " << label
                << " panel skipped (needs at least 2 observations)\n";
    }
  };
  if (frequency == "daily" || frequency == "both") {
    add_panel(daily, "daily");
  }
  if (frequency == "weekly" || frequency == "both") {
    const WeeklyAggregate weekly = aggregate_weekly(daily);
    if (weekly.skipped_weeks > 0) {
      std::cerr << "note: " << weekly.skipped_weeks
                << " calendar week(s) had no business days\n";
    }
    add_panel(weekly.weekly, "weekly");
  }
  if (summaries.empty())
    throw ConfigError("--frequency must be daily, weekly or both");

  for (const StatsSummary& summary : summaries) {
    std::cout << stats_to_text(summary);
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (const StatsSummary& summary : summaries) {
      const std::string stem =
          summary.frequency == Frequency::Daily ? "stats_daily" : "stats_weekly";
      if (format == "json") {
        std::ofstream out(out_dir + "/" + stem + ".json");
        out << stats_to_json(summary).dump(2) << "\n";
      } else {
        write_stats_csv(out_dir + "/" + stem + ".csv", summary);
      }
    }
  }
  return kExitOk;
}

int cmd_backtest(const BacktestCli& cli) {
  const double start_ms = now_ms();

  BacktestConfig config;
  std::string input = cli.input;

  if (!cli.from_manifest.empty()) {
    std::ifstream in(cli.from_manifest);
    if (!in)
      throw ConfigError("cannot open manifest '" + cli.from_manifest + "'");
    nlohmann::json j;
    in >> j;
    const RunManifest manifest = manifest_from_json(j);
    apply_config_pairs(config, input, manifest.config);
  }
  if (!cli.config_file.empty()) {
    const IniData ini = parse_ini(cli.config_file);
    for (const auto& [key, value] : ini.globals) {
      apply_global_key(config, input, key, value);
    }
    for (const auto& [section, entries] : ini.sections) {
      if (section.rfind("model.", 0) != 0)
        throw ConfigError("unknown config section [" + section + "]");
      ModelConfig model;
      model.name = section.substr(6);
      for (const auto& [key, value] : entries) {
        apply_model_key(model, key, value);
      }
      config.models.push_back(model);
    }
  }

  // flags override the config file
  if (!cli.models_flag.empty()) {
    config.models.clear();
    for (const std::string& token : split(cli.models_flag, ',')) {
      config.models.push_back(parse_model_token(token));
    }
  }
  if (cli.window > 0) config.window_days = cli.window;
  if (cli.paths > 0) config.paths = cli.paths;
  if (cli.horizon > 0) config.horizon_days = cli.horizon;
  if (cli.seed >= 0) config.seed = static_cast<std::uint64_t>(cli.seed);
  if (cli.threads >= 0) config.threads = cli.threads;
  if (!cli.levels_flag.empty()) {
    config.levels.clear();
    for (const std::string& level : split(cli.levels_flag, ',')) {
      config.levels.push_back(to_double(level, "levels"));
    }
  }
  if (!cli.calendar_flag.empty()) {
    apply_global_key(config, input, "calendar", cli.calendar_flag);
  }
  if (input.empty()) throw ConfigError("--input is required");
  if (config.models.empty())
    throw ConfigError("no models configured (use --models or --config)");

  const ReturnSeries daily = load_daily_returns(input, cli.delimiter);
  const double loaded_ms = now_ms();

  const BacktestResult result = run_backtest(daily, config);
  const double backtest_ms = now_ms();

  std::filesystem::create_directories(cli.out_dir);
  write_var_estimates_csv(cli.out_dir + "/var_estimates.csv", result);
  write_breach_records_csv(cli.out_dir + "/breach_records.csv", result);

  if (cli.save_models && !result.eval_dates.empty()) {
    for (const ModelConfig& model : config.models) {
      const ModelBundle bundle =
          build_bundle(daily, config, model, result.eval_dates.back());
      save_bundle(bundle, cli.out_dir + "/model_" + model.name + ".json");
    }
  }

  RunManifest manifest;
  manifest.command = "backtest";
  manifest.artifact_version = kArtifactVersion;
  manifest.seed = config.seed;
  manifest.config = snapshot_config(config, input);
  manifest.input_digests.emplace_back(input, file_digest(input));
  manifest.timings_ms.emplace_back("load", loaded_ms - start_ms);
  manifest.timings_ms.emplace_back("backtest", backtest_ms - loaded_ms);
  manifest.timings_ms.emplace_back("write", now_ms() - backtest_ms);
  save_manifest(manifest, cli.out_dir + "/manifest.json");

  std::cout << "evaluation dates: " << result.eval_dates.size() << "\n";
  std::cout << "records written: " << result.records.size() << "\n";
  if (!result.failures.empty()) {
    std::cout << "failed (date, model) cells: " << result.failures.size()
              << "\n";
  }
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& files,
                const std::string& format, const std::string& out_dir,
                bool one_sided, bool raw_loss_costs, char delimiter) {
  if (files.size() < 2)
    throw ConfigError("compare needs at least two result files");

  std::vector<std::vector<BreachRecord>> sets;
  for (const std::string& file : files) {
    sets.push_back(read_breach_records_csv(file, delimiter));
    if (sets.back().empty())
      throw DataError("result file '" + file + "' holds no records");
  }

  // all files must share one evaluation calendar
  auto calendar_of = [](const std::vector<BreachRecord>& records) {
    std::set<std::int32_t> dates;
    for (const BreachRecord& rec : records) dates.insert(rec.date.serial);
    return dates;
  };
  const std::set<std::int32_t> base = calendar_of(sets[0]);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const std::set<std::int32_t> other = calendar_of(sets[i]);
    if (other != base) {
      std::string divergent;
      std::set<std::int32_t> diff;
      std::set_symmetric_difference(base.begin(), base.end(), other.begin(),
                                    other.end(),
                                    std::inserter(diff, diff.begin()));
      int listed = 0;
      for (std::int32_t serial : diff) {
        if (listed++ == 8) {
          divergent += " ...";
          break;
        }
        divergent += " " + format_date(Date{serial});
      }
      throw DataError("result files disagree on the evaluation calendar:" +
                      divergent);
    }
  }

  // qualify model names by file when several files collide
  std::vector<BreachRecord> merged;
  std::map<std::string, int> name_uses;
  const bool qualify = files.size() > 1;
  std::vector<std::vector<std::string>> file_models(files.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const std::string stem =
        std::filesystem::path(files[i]).stem().string();
    for (BreachRecord rec : sets[i]) {
      if (std::find(file_models[i].begin(), file_models[i].end(), rec.model) ==
          file_models[i].end()) {
        file_models[i].push_back(rec.model);
      }
      if (qualify) rec.model = rec.model + "@" + stem + std::to_string(i + 1);
      merged.push_back(std::move(rec));
    }
  }

  const std::vector<BreachPanel> panels = build_breach_panels(merged);
  const ComparisonReport report =
      comparison_matrix(panels, !one_sided, raw_loss_costs);

  // paired comp totals when exactly two files share their model lists
  std::optional<CompTotals> totals;
  if (files.size() == 2 && file_models[0] == file_models[1]) {
    std::vector<std::pair<BreachSet, BreachSet>> pairs;
    for (const BreachPanel& panel : panels) {
      std::map<std::string, const BreachSet*> by_name;
      for (const BreachSet& set : panel.sets) by_name[set.model] = &set;
      for (const std::string& model : file_models[0]) {
        const std::string stem_a =
            std::filesystem::path(files[0]).stem().string();
        const std::string stem_b =
            std::filesystem::path(files[1]).stem().string();
        const auto a = by_name.find(model + "@" + stem_a + "1");
        const auto b = by_name.find(model + "@" + stem_b + "2");
        if (a != by_name.end() && b != by_name.end()) {
          pairs.emplace_back(*a->second, *b->second);
        }
      }
    }
    if (!pairs.empty()) totals = comp_totals(pairs);
  }

  for (const PanelReport& panel : report.panels) {
    std::printf("level %.4g asset %s (N = %d)\n", panel.level,
                panel.asset.c_str(), panel.observations);
    for (std::size_t i = 0; i < panel.models.size(); ++i) {
      std::printf("  %-40s breaches %4d (%.2f%%)\n", panel.models[i].c_str(),
                  panel.breach_counts[i], 100.0 * panel.breach_rates[i]);
    }
  }
  if (totals) {
    std::printf("comp totals: first %.1f second %.1f of %d comparisons\n",
                totals->group_a, totals->group_b, totals->pairs);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    if (format == "json") {
      nlohmann::json j = comparison_to_json(report);
      if (totals) {
        j["comp_totals"] = nlohmann::json{{"first", totals->group_a},
                                          {"second", totals->group_b},
                                          {"pairs", totals->pairs}};
      }
      std::ofstream out(out_dir + "/comparison.json");
      out << j.dump(2) << "\n";
    } else {
      write_comparison_csv(out_dir + "/comparison.csv", report);
      if (totals) {
        std::ofstream out(out_dir + "/comparison_totals.csv");
        out << "group,comp_total,pairs\n";
        out << "first," << format_double(totals->group_a) << ","
            << totals->pairs << "\n";
        out << "second," << format_double(totals->group_b) << ","
            << totals->pairs << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_simulate(const std::string& bundle_path, const std::string& input,
                 int horizon, int paths, long long seed_flag,
                 const std::string& format, const std::string& out_dir,
                 char delimiter) {
  const ModelBundle bundle = load_bundle(bundle_path);
  const std::uint64_t seed =
      seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 0;
  Rng rng(seed);

  Eigen::MatrixXd history = bundle.history_tail;
  if (!input.empty()) {
    const ReturnSeries daily = load_daily_returns(input, delimiter);
    history = daily.returns;
  }

  const Eigen::Index n_assets = [&]() -> Eigen::Index {
    switch (bundle.kind) {
      case ModelKind::Classic:
        return bundle.classic->dim();
      case ModelKind::Hmm:
        return bundle.hmm->dim();
      default:
        return bundle.net->dim();
    }
  }();

  Eigen::MatrixXd horizon_returns(paths, n_assets);
  Eigen::MatrixXd echo_path;
  switch (bundle.kind) {
    case ModelKind::Classic: {
      for (int p = 0; p < paths; ++p) {
        Eigen::ArrayXd growth = Eigen::ArrayXd::Ones(n_assets);
        Eigen::MatrixXd path(horizon, n_assets);
        for (int t = 0; t < horizon; ++t) {
          path.row(t) = sample(*bundle.classic, rng).transpose();
          growth *= 1.0 + path.row(t).transpose().array();
        }
        horizon_returns.row(p) = (growth - 1.0).matrix().transpose();
        if (p == 0) echo_path = path;
      }
      break;
    }
    case ModelKind::Hmm: {
      if (bundle.hmm_start.size() != bundle.hmm->k())
        throw DataError("bundle lacks a smoothed start distribution");
      Eigen::VectorXd start = bundle.hmm_start;
      if (!input.empty()) {
        const SmoothedPath smoothed = forward_backward(*bundle.hmm, history);
        start = smoothed.probs.row(smoothed.probs.rows() - 1).transpose();
      }
      for (int p = 0; p < paths; ++p) {
        const Eigen::MatrixXd path =
            simulate_hmm(*bundle.hmm, start, horizon, rng);
        Eigen::ArrayXd growth = Eigen::ArrayXd::Ones(n_assets);
        for (int t = 0; t < horizon; ++t) {
          growth *= 1.0 + path.row(t).transpose().array();
        }
        horizon_returns.row(p) = (growth - 1.0).matrix().transpose();
        if (p == 0) echo_path = path;
      }
      break;
    }
    default: {
      if (history.rows() == 0)
        throw DataError(
            "neural bundle needs --input history or an embedded tail");
      horizon_returns =
          simulate_horizon_returns(*bundle.net, history, horizon, paths, rng);
      Rng echo_rng(seed);
      echo_path = simulate_path(*bundle.net, history, horizon, echo_rng);
      break;
    }
  }

  std::vector<std::string> names = bundle.asset_names;
  while (static_cast<Eigen::Index>(names.size()) < n_assets) {
    names.push_back("asset" + std::to_string(names.size()));
  }

  if (paths == 1) {
    std::cout << "single simulated path (" << horizon << " days x "
              << n_assets << " assets)\n";
    for (int t = 0; t < horizon; ++t) {
      std::cout << "  day " << (t + 1) << ":";
      for (Eigen::Index a = 0; a < n_assets; ++a) {
        std::cout << " " << format_double(echo_path(t, a));
      }
      std::cout << "\n";
    }
  }

  nlohmann::json json_out;
  json_out["model"] = bundle.name;
  json_out["paths"] = paths;
  json_out["horizon"] = horizon;
  std::cout << "compounded " << horizon << "-day return quantiles over "
            << paths << " paths\n";
  for (Eigen::Index a = 0; a < n_assets; ++a) {
    std::vector<double> column(static_cast<std::size_t>(paths));
    for (int p = 0; p < paths; ++p) column[static_cast<std::size_t>(p)] =
        horizon_returns(p, a);
    std::sort(column.begin(), column.end());
    std::cout << "  " << names[static_cast<std::size_t>(a)] << ":";
    nlohmann::json asset_q = nlohmann::json::object();
    for (double level : stats_quantile_levels()) {
      const double q = quantile_sorted(column, level);
      std::printf(" %g%%=%s", level * 100.0, format_double(q).c_str());
      asset_q[format_double(level)] = q;
    }
    std::cout << "\n";
    json_out["quantiles"][names[static_cast<std::size_t>(a)]] = asset_q;
  }
  if (!out_dir.empty() && format == "json") {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/simulation.json");
    out << json_out.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching Monte-Carlo VaR engine"};
  app.require_subcommand(1);

  // stats
  auto* stats = app.add_subcommand("stats", "Descriptive return statistics");
  std::string stats_input, stats_frequency = "both", stats_format = "csv",
              stats_out;
  char stats_delim = ',';
  stats->add_option("--input", stats_input, "price CSV")->required();
  stats->add_option("--delimiter", stats_delim, "field delimiter");
  stats->add_option("--frequency", stats_frequency, "daily|weekly|both");
  stats->add_option("--format", stats_format, "csv|json");
  stats->add_option("--out-dir", stats_out, "write report files here");

  // backtest
  auto* backtest = app.add_subcommand(
      "backtest", "Moving-window VaR backtest over configured models");
  BacktestCli bt;
  backtest->add_option("--input", bt.input, "price CSV");
  backtest->add_option("--config", bt.config_file, "key = value config file");
  backtest->add_option("--from-manifest", bt.from_manifest,
                       "re-run the configuration of a previous manifest");
  backtest->add_option("--models", bt.models_flag,
                       "comma list: classic|hmm|ff|cnn|lstm with +init/+reg");
  backtest->add_option("--window", bt.window, "training window in days");
  backtest->add_option("--paths", bt.paths, "simulated paths per date");
  backtest->add_option("--levels", bt.levels_flag, "comma list of VaR levels");
  backtest->add_option("--horizon", bt.horizon, "simulation horizon in days");
  backtest->add_option("--seed", bt.seed, "master seed");
  backtest->add_option("--threads", bt.threads,
                       "worker threads (0 = hardware)");
  backtest->add_option("--calendar", bt.calendar_flag, "weekly|monthly");
  backtest->add_option("--delimiter", bt.delimiter, "field delimiter");
  backtest->add_option("--out-dir", bt.out_dir, "output directory");
  backtest->add_flag("--save-models", bt.save_models,
                     "persist last-date model bundles");

  // compare
  auto* compare = app.add_subcommand(
      "compare", "Pairwise comparison of backtest result files");
  std::vector<std::string> compare_files;
  std::string compare_format = "csv", compare_out;
  bool one_sided = false;
  bool raw_loss_costs = false;
  char compare_delim = ',';
  compare->add_option("files", compare_files, "breach_records.csv files")
      ->required()
      ->expected(-2);
  compare->add_option("--format", compare_format, "csv|json");
  compare->add_option("--out-dir", compare_out, "write reports here");
  compare->add_option("--delimiter", compare_delim, "field delimiter");
  compare->add_flag("--one-sided", one_sided, "one-sided p-values");
  compare->add_flag("--raw-loss-costs", raw_loss_costs,
                    "account raw realized losses instead of the excess");

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "Monte-Carlo simulation from a persisted model bundle");
  std::string sim_model, sim_input, sim_format = "csv", sim_out;
  int sim_horizon = 5, sim_paths = 100000;
  long long sim_seed = 0;
  char sim_delim = ',';
  simulate->add_option("--model", sim_model, "model bundle JSON")->required();
  simulate->add_option("--input", sim_input, "price CSV history override");
  simulate->add_option("--horizon", sim_horizon, "days to simulate");
  simulate->add_option("--paths", sim_paths, "number of paths");
  simulate->add_option("--seed", sim_seed, "simulation seed");
  simulate->add_option("--format", sim_format, "csv|json");
  simulate->add_option("--out-dir", sim_out, "write summary here");
  simulate->add_option("--delimiter", sim_delim, "field delimiter");

  try {
    app.parse(argc, argv);
    if (stats->parsed()) {
      return cmd_stats(stats_input, stats_delim, stats_frequency,
                       stats_format, stats_out);
    }
    if (backtest->parsed()) return cmd_backtest(bt);
    if (compare->parsed()) {
      return cmd_compare(compare_files, compare_format, compare_out,
                         one_sided, raw_loss_costs, compare_delim);
    }
    if (simulate->parsed()) {
      return cmd_simulate(sim_model, sim_input, sim_horizon, sim_paths,
                          sim_seed, sim_format, sim_out, sim_delim);
    }
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
