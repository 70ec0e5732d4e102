#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regimevar/hmm.hpp"
#include "regimevar/market_data.hpp"
#include "regimevar/regime_net.hpp"

namespace regimevar {

enum class ModelKind { Classic, Hmm, Ffn, Tcn, Lstm };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelConfig {
  std::string name;
  ModelKind kind = ModelKind::Classic;
  bool hmm_init = false;
  double reg_weight = 0.0;
  int k = 2;
  int epochs = 200;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  int attempts = 5;
  int lookahead = 5;
  /// Refit every n-th evaluation date; between refits the trained model is
  /// reused but simulation still starts from the current history.
  int refit_stride = 1;
  HmmFitConfig hmm_fit;
  int hmm_retries = 5;
};

enum class EvalCalendar { Weekly, Monthly };

struct BacktestConfig {
  int window_days = 2000;
  int horizon_days = 5;
  int paths = 100000;
  std::vector<double> levels{0.01, 0.05};
  EvalCalendar calendar = EvalCalendar::Weekly;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  std::vector<ModelConfig> models;
  /// When true, breach costs account the raw realized loss instead of the
  /// excess below the threshold.
  bool raw_loss_accounting = false;
};

struct VarEstimate {
  Date date;
  std::string model;
  std::string asset;
  double level = 0.0;
  double threshold = 0.0;
};

struct BreachRecord {
  Date date;
  std::string model;
  std::string asset;
  double level = 0.0;
  double realized = 0.0;
  double threshold = 0.0;
  bool breached = false;
  double excess = 0.0;  // realized - threshold, negative when breached
};

struct BacktestResult {
  std::vector<Date> eval_dates;
  std::vector<std::string> asset_names;
  std::vector<std::string> model_names;
  std::vector<VarEstimate> estimates;
  std::vector<BreachRecord> records;
  std::vector<std::pair<Date, std::string>> failures;
};

/// Moving-window backtest: at each evaluation date every configured model
/// is fitted on the trailing window, simulates `paths` horizon paths,
/// compounds them to period returns, and the per-level quantiles become
/// VaR thresholds compared with the realized next-period return.
/// Per-(date, model) seeds derive from the master seed, so results are
/// independent of the thread count.
BacktestResult run_backtest(const ReturnSeries& daily,
                            const BacktestConfig& config);

/// Empirical alpha-quantile of simulated period returns (linear
/// interpolation); requires at least 1/alpha samples.
double var_threshold(const std::vector<double>& period_returns, double alpha);

/// Breached iff realized < threshold (strict).
std::vector<BreachRecord> detect_breaches(
    const std::vector<VarEstimate>& estimates,
    const ReturnSeries& realized_weekly);

struct BreachCostSummary {
  double accumulated_per_year = 0.0;
  std::optional<double> average_per_breach;
  int breaches = 0;
};

/// Accumulated excess per year and average excess per breach. With
/// raw_loss set, the raw realized return is accounted instead of the
/// excess below the threshold.
BreachCostSummary breach_costs(const std::vector<BreachRecord>& records,
                               double years, bool raw_loss = false);

}  // namespace regimevar
