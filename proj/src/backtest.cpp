#include "regimevar/backtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "regimevar/errors.hpp"
#include "regimevar/stats.hpp"

namespace regimevar {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Classic:
      return "classic";
    case ModelKind::Hmm:
      return "hmm";
    case ModelKind::Ffn:
      return "ff";
    case ModelKind::Tcn:
      return "cnn";
    case ModelKind::Lstm:
      return "lstm";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "classic") return ModelKind::Classic;
  if (name == "hmm") return ModelKind::Hmm;
  if (name == "ff" || name == "ffn") return ModelKind::Ffn;
  if (name == "cnn" || name == "tcn") return ModelKind::Tcn;
  if (name == "lstm") return ModelKind::Lstm;
  throw ConfigError("unknown model kind '" + name + "'");
}

double var_threshold(const std::vector<double>& period_returns, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw ConfigError("VaR level must lie in (0, 0.5)");
  if (static_cast<double>(period_returns.size()) < 1.0 / alpha)
    throw ConfigError("need at least 1/alpha simulated returns for the quantile");
  return quantile(period_returns, alpha);
}

std::vector<BreachRecord> detect_breaches(
    const std::vector<VarEstimate>& estimates,
    const ReturnSeries& realized_weekly) {
  std::map<std::int32_t, Eigen::Index> date_rows;
  for (Eigen::Index t = 0; t < realized_weekly.rows(); ++t) {
    date_rows[realized_weekly.dates[t].serial] = t;
  }
  std::map<std::string, Eigen::Index> asset_cols;
  for (std::size_t j = 0; j < realized_weekly.asset_names.size(); ++j) {
    asset_cols[realized_weekly.asset_names[j]] = static_cast<Eigen::Index>(j);
  }

  std::vector<BreachRecord> records;
  records.reserve(estimates.size());
  for (const VarEstimate& est : estimates) {
    const auto row = date_rows.find(est.date.serial);
    if (row == date_rows.end())
      throw DataError("no realized return for " + format_date(est.date));
    const auto col = asset_cols.find(est.asset);
    if (col == asset_cols.end())
      throw DataError("no realized series for asset '" + est.asset + "'");
    BreachRecord rec;
    rec.date = est.date;
    rec.model = est.model;
    rec.asset = est.asset;
    rec.level = est.level;
    rec.threshold = est.threshold;
    rec.realized = realized_weekly.returns(row->second, col->second);
    rec.breached = rec.realized < rec.threshold;
    rec.excess = rec.realized - rec.threshold;
    records.push_back(rec);
  }
  return records;
}

BreachCostSummary breach_costs(const std::vector<BreachRecord>& records,
                               double years, bool raw_loss) {
  if (!(years > 0.0)) throw ConfigError("backtest span must be positive");
  BreachCostSummary summary;
  double total = 0.0;
  for (const BreachRecord& rec : records) {
    if (!rec.breached) continue;
    total += raw_loss ? rec.realized : rec.excess;
    ++summary.breaches;
  }
  summary.accumulated_per_year = total / years;
  if (summary.breaches > 0)
    summary.average_per_breach = total / summary.breaches;
  return summary;
}

namespace {

constexpr std::uint64_t kFitTag = 0xF17;
constexpr std::uint64_t kSimTag = 0x51A;
constexpr std::uint64_t kRetryTag = 0x9E7;

std::vector<Eigen::Index> period_end_indices(const ReturnSeries& daily,
                                             EvalCalendar calendar) {
  std::vector<Eigen::Index> ends;
  std::int64_t current_key = 0;
  bool open = false;
  for (Eigen::Index t = 0; t < daily.rows(); ++t) {
    std::int64_t key;
    if (calendar == EvalCalendar::Weekly) {
      key = friday_of_week(daily.dates[t]).serial;
    } else {
      const CivilDate c = civil_from_days(daily.dates[t].serial);
      key = static_cast<std::int64_t>(c.year) * 12 + c.month;
    }
    if (open && key != current_key) ends.push_back(t - 1);
    current_key = key;
    open = true;
  }
  if (open) ends.push_back(daily.rows() - 1);
  return ends;
}

struct FittedModel {
  std::optional<MvGaussian> classic;
  std::optional<HmmParams> hmm;
  std::optional<RegimeNetModel> net;
};

HmmParams fit_hmm_with_retries(const Eigen::Ref<const Eigen::MatrixXd>& window,
                               const ModelConfig& model, std::uint64_t seed) {
  for (int attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, kRetryTag, static_cast<std::uint64_t>(attempt)));
    try {
      return baum_welch(window, model.k, model.hmm_fit, rng).params;
    } catch (const RegimeCollapseError&) {
      if (attempt + 1 >= model.hmm_retries) throw;
    }
  }
}

FittedModel fit_model(const Eigen::Ref<const Eigen::MatrixXd>& window,
                      const ModelConfig& model, const BacktestConfig& config,
                      std::uint64_t fit_seed) {
  FittedModel fitted;
  switch (model.kind) {
    case ModelKind::Classic: {
      fitted.classic = fit_gaussian(window);
      break;
    }
    case ModelKind::Hmm: {
      fitted.hmm = fit_hmm_with_retries(window, model, fit_seed);
      break;
    }
    case ModelKind::Ffn:
    case ModelKind::Tcn:
    case ModelKind::Lstm: {
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
      train.seed = fit_seed;
      std::optional<HmmParams> init;
      if (model.hmm_init) {
        init = fit_hmm_with_retries(window, model,
                                    derive_seed(fit_seed, kRetryTag + 1, 0));
      }
      fitted.net = train_regime_net(window, spec, train,
                                    init ? &*init : nullptr, nullptr);
      break;
    }
  }
  return fitted;
}

// Compounded horizon returns per path and asset from iid draws.
Eigen::MatrixXd classic_horizon_returns(const MvGaussian& g, int horizon,
                                        int paths, Rng& rng) {
  Eigen::MatrixXd out(paths, g.dim());
  for (int p = 0; p < paths; ++p) {
    Eigen::ArrayXd growth = Eigen::ArrayXd::Ones(g.dim());
    for (int t = 0; t < horizon; ++t) {
      growth *= 1.0 + sample(g, rng).array();
    }
    out.row(p) = (growth - 1.0).matrix().transpose();
  }
  return out;
}

Eigen::MatrixXd hmm_horizon_returns(const HmmParams& params,
                                    const Eigen::VectorXd& smoothed,
                                    int horizon, int paths, Rng& rng) {
  Eigen::MatrixXd out(paths, params.dim());
  for (int p = 0; p < paths; ++p) {
    Eigen::ArrayXd growth = Eigen::ArrayXd::Ones(params.dim());
    int state = rng.categorical(smoothed);
    for (int t = 0; t < horizon; ++t) {
      state = rng.categorical(params.trans.row(state).transpose());
      growth *=
          1.0 + sample(params.regimes[static_cast<std::size_t>(state)], rng)
                    .array();
    }
    out.row(p) = (growth - 1.0).matrix().transpose();
  }
  return out;
}

struct CellOutcome {
  bool failed = false;
  Eigen::MatrixXd thresholds;  // [levels x assets]
};

}  // namespace

BacktestResult run_backtest(const ReturnSeries& daily,
                            const BacktestConfig& config) {
  if (daily.frequency != Frequency::Daily)
    throw ConfigError("backtest expects a daily return series");
  if (config.paths < 1) throw ConfigError("paths must be >= 1");
  if (config.window_days <= config.horizon_days)
    throw ConfigError("window must exceed the horizon");
  for (double level : config.levels) {
    if (!(level > 0.0 && level < 0.5))
      throw ConfigError("VaR levels must lie in (0, 0.5)");
  }
  if (config.models.empty()) throw ConfigError("no models configured");
  {
    std::set<std::string> names;
    for (const ModelConfig& m : config.models) {
      if (!names.insert(m.name).second)
        throw ConfigError("duplicate model name '" + m.name + "'");
    }
  }

  const std::vector<Eigen::Index> ends =
      period_end_indices(daily, config.calendar);

  // Evaluation dates need a trailing window and a completed next period.
  std::vector<Eigen::Index> eval_end;   // window end row per evaluation
  std::vector<Eigen::Index> next_end;   // realized period end row
  for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
    if (ends[i] >= config.window_days - 1) {
      eval_end.push_back(ends[i]);
      next_end.push_back(ends[i + 1]);
    }
  }
  if (eval_end.empty())
    throw InsufficientDataError(
        "series too short for one window plus one evaluation period");

  const std::size_t n_eval = eval_end.size();
  const std::size_t n_models = config.models.size();
  const Eigen::Index n_assets = daily.assets();
  const Eigen::Index n_levels = static_cast<Eigen::Index>(config.levels.size());

  std::vector<std::vector<CellOutcome>> grid(
      n_models, std::vector<CellOutcome>(n_eval));

  struct Block {
    std::size_t model;
    std::size_t first;  // first evaluation index of the block
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t m = 0; m < n_models; ++m) {
    const int stride = std::max(1, config.models[m].refit_stride);
    for (std::size_t first = 0; first < n_eval;
         first += static_cast<std::size_t>(stride)) {
      blocks.push_back(Block{
          m, first,
          std::min<std::size_t>(static_cast<std::size_t>(stride),
                                n_eval - first)});
    }
  }

  auto run_block = [&](const Block& block) {
    const ModelConfig& model = config.models[block.model];
    const std::uint64_t model_seed =
        derive_seed(config.seed, hash_string(model.name));

    FittedModel fitted;
    bool fit_ok = true;
    {
      const Eigen::Index end = eval_end[block.first];
      const Eigen::Index start = end - config.window_days + 1;
      const std::uint64_t fit_seed = derive_seed(
          model_seed, kFitTag,
          static_cast<std::uint64_t>(daily.dates[end].serial));
      try {
        fitted = fit_model(daily.returns.middleRows(start, config.window_days),
                           model, config, fit_seed);
      } catch (const NumericalError&) {
        fit_ok = false;
      }
    }

    for (std::size_t offset = 0; offset < block.count; ++offset) {
      const std::size_t e = block.first + offset;
      CellOutcome& cell = grid[block.model][e];
      if (!fit_ok) {
        cell.failed = true;
        continue;
      }
      const Eigen::Index end = eval_end[e];
      const Eigen::Index start = end - config.window_days + 1;
      const auto window = daily.returns.middleRows(start, config.window_days);
      Rng sim_rng(derive_seed(
          model_seed, kSimTag,
          static_cast<std::uint64_t>(daily.dates[end].serial)));
      try {
        Eigen::MatrixXd horizon_returns;
        if (fitted.classic) {
          horizon_returns = classic_horizon_returns(
              *fitted.classic, config.horizon_days, config.paths, sim_rng);
        } else if (fitted.hmm) {
          const SmoothedPath smoothed = forward_backward(*fitted.hmm, window);
          horizon_returns = hmm_horizon_returns(
              *fitted.hmm,
              smoothed.probs.row(smoothed.probs.rows() - 1).transpose(),
              config.horizon_days, config.paths, sim_rng);
        } else {
          horizon_returns =
              simulate_horizon_returns(*fitted.net, window,
                                       config.horizon_days, config.paths,
                                       sim_rng);
        }
        cell.thresholds.resize(n_levels, n_assets);
        std::vector<double> column(static_cast<std::size_t>(config.paths));
        for (Eigen::Index a = 0; a < n_assets; ++a) {
          for (int p = 0; p < config.paths; ++p) {
            column[static_cast<std::size_t>(p)] = horizon_returns(p, a);
          }
          std::sort(column.begin(), column.end());
          for (Eigen::Index l = 0; l < n_levels; ++l) {
            cell.thresholds(l, a) = quantile_sorted(
                column, config.levels[static_cast<std::size_t>(l)]);
          }
        }
        if (!cell.thresholds.allFinite())
          throw NumericalError("non-finite VaR threshold");
      } catch (const NumericalError&) {
        cell.failed = true;
      }
    }
  };

  int threads = config.threads;
  if (threads <= 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads <= 1 || blocks.size() <= 1) {
    for (const Block& block : blocks) run_block(block);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= blocks.size()) return;
        run_block(blocks[i]);
      }
    };
    std::vector<std::thread> pool;
    const std::size_t pool_size =
        std::min<std::size_t>(static_cast<std::size_t>(threads), blocks.size());
    pool.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Realized next-period returns, compounded over the following period.
  Eigen::MatrixXd realized(static_cast<Eigen::Index>(n_eval), n_assets);
  for (std::size_t e = 0; e < n_eval; ++e) {
    Eigen::ArrayXd growth = Eigen::ArrayXd::Ones(n_assets);
    for (Eigen::Index t = eval_end[e] + 1; t <= next_end[e]; ++t) {
      growth *= 1.0 + daily.returns.row(t).transpose().array();
    }
    realized.row(static_cast<Eigen::Index>(e)) =
        (growth - 1.0).matrix().transpose();
  }

  BacktestResult result;
  result.asset_names = daily.asset_names;
  for (const ModelConfig& m : config.models) result.model_names.push_back(m.name);
  for (std::size_t e = 0; e < n_eval; ++e) {
    result.eval_dates.push_back(daily.dates[eval_end[e]]);
  }
  for (std::size_t e = 0; e < n_eval; ++e) {
    const Date date = result.eval_dates[e];
    for (std::size_t m = 0; m < n_models; ++m) {
      const CellOutcome& cell = grid[m][e];
      if (cell.failed) {
        result.failures.emplace_back(date, config.models[m].name);
        continue;
      }
      for (Eigen::Index a = 0; a < n_assets; ++a) {
        for (Eigen::Index l = 0; l < n_levels; ++l) {
          VarEstimate est;
          est.date = date;
          est.model = config.models[m].name;
          est.asset = result.asset_names[static_cast<std::size_t>(a)];
          est.level = config.levels[static_cast<std::size_t>(l)];
          est.threshold = cell.thresholds(l, a);
          result.estimates.push_back(est);

          BreachRecord rec;
          rec.date = date;
          rec.model = est.model;
          rec.asset = est.asset;
          rec.level = est.level;
          rec.threshold = est.threshold;
          rec.realized = realized(static_cast<Eigen::Index>(e), a);
          rec.breached = rec.realized < rec.threshold;
          rec.excess = rec.realized - rec.threshold;
          result.records.push_back(rec);
        }
      }
    }
  }
  return result;
}

}  // namespace regimevar
