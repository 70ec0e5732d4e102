#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "regimevar/dates.hpp"
#include "regimevar/market_data.hpp"
#include "regimevar/nn/param_store.hpp"
#include "regimevar/rng.hpp"

namespace testutil {

inline std::vector<regimevar::Date> business_days(regimevar::Date start,
                                                  int count) {
  std::vector<regimevar::Date> days;
  regimevar::Date d = start;
  while (static_cast<int>(days.size()) < count) {
    if (!regimevar::is_weekend(d)) days.push_back(d);
    d.serial += 1;
  }
  return days;
}

inline regimevar::ReturnSeries make_daily_series(
    const Eigen::MatrixXd& returns, regimevar::Date start,
    std::vector<std::string> names = {}) {
  regimevar::ReturnSeries series;
  series.frequency = regimevar::Frequency::Daily;
  series.returns = returns;
  series.dates = business_days(start, static_cast<int>(returns.rows()));
  if (names.empty()) {
    for (Eigen::Index j = 0; j < returns.cols(); ++j) {
      names.push_back("asset" + std::to_string(j));
    }
  }
  series.asset_names = std::move(names);
  return series;
}

struct RegimeSample {
  Eigen::MatrixXd returns;
  std::vector<int> states;  // 0 = bull, 1 = bear
};

/// Two-regime Markov-switching Gaussian generator (test-local; independent
/// of the library's simulators). Asset 0 is equity-like; extra assets are
/// scaled copies with independent noise.
inline RegimeSample generate_two_regime(int steps, int assets,
                                        std::uint64_t seed,
                                        double bull_mean = 0.0004,
                                        double bull_sd = 0.008,
                                        double bear_mean = -0.0008,
                                        double bear_sd = 0.020,
                                        double bull_stay = 0.98,
                                        double bear_stay = 0.98) {
  regimevar::Rng rng(seed);
  RegimeSample sample;
  sample.returns.resize(steps, assets);
  sample.states.reserve(static_cast<std::size_t>(steps));
  int state = rng.uniform() < 0.5 ? 0 : 1;
  for (int t = 0; t < steps; ++t) {
    const double stay = state == 0 ? bull_stay : bear_stay;
    if (rng.uniform() >= stay) state = 1 - state;
    sample.states.push_back(state);
    const double mean = state == 0 ? bull_mean : bear_mean;
    const double sd = state == 0 ? bull_sd : bear_sd;
    for (int a = 0; a < assets; ++a) {
      const double scale = a == 0 ? 1.0 : 0.4;
      sample.returns(t, a) = scale * mean + scale * sd * rng.normal();
    }
  }
  return sample;
}

inline Eigen::MatrixXd iid_gaussian_returns(int steps, int assets,
                                            std::uint64_t seed,
                                            double mean = 0.0003,
                                            double sd = 0.010) {
  regimevar::Rng rng(seed);
  Eigen::MatrixXd r(steps, assets);
  for (int t = 0; t < steps; ++t) {
    for (int a = 0; a < assets; ++a) {
      const double scale = a == 0 ? 1.0 : 0.5;
      r(t, a) = scale * mean + scale * sd * rng.normal();
    }
  }
  return r;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
};

/// Central finite differences over every entry of every tensor in the
/// store. `loss` must recompute the full objective from current values
/// (it may dirty gradient buffers); `analytic` holds the gradients under
/// test.
inline GradCheckResult finite_difference_check(
    regimevar::nn::ParamStore& store,
    const std::vector<std::pair<std::string, Eigen::MatrixXd>>& analytic,
    const std::function<double()>& loss, double eps = 1e-5) {
  GradCheckResult result;
  for (const auto& [name, grad] : analytic) {
    Eigen::MatrixXd& value = store.value(name);
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double saved = value(r, c);
        value(r, c) = saved + eps;
        const double up = loss();
        value(r, c) = saved - eps;
        const double down = loss();
        value(r, c) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = grad(r, c);
        const double rel =
            std::fabs(a - numeric) /
            std::max({1.0, std::fabs(a), std::fabs(numeric)});
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_param = name + "(" + std::to_string(r) + "," +
                               std::to_string(c) + ")";
        }
      }
    }
  }
  return result;
}

inline std::vector<std::pair<std::string, Eigen::MatrixXd>> snapshot_grads(
    const regimevar::nn::ParamStore& store) {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> grads;
  for (const std::string& name : store.names()) {
    grads.emplace_back(name, store.grad(name));
  }
  return grads;
}

}  // namespace testutil
