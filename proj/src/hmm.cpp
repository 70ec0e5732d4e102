#include "regimevar/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "regimevar/errors.hpp"

namespace regimevar {

void HmmParams::validate() const {
  const int states = k();
  if (states < 1) throw NumericalError("HMM needs at least one regime");
  if (trans.rows() != states || trans.cols() != states)
    throw NumericalError("transition matrix shape mismatch");
  if (static_cast<int>(regimes.size()) != states)
    throw NumericalError("regime count mismatch");
  if (std::abs(pi0.sum() - 1.0) > 1e-12 || (pi0.array() < 0.0).any())
    throw NumericalError("pi0 is not a probability distribution");
  for (int i = 0; i < states; ++i) {
    if (std::abs(trans.row(i).sum() - 1.0) > 1e-12 ||
        (trans.row(i).array() < 0.0).any() ||
        (trans.row(i).array() > 1.0).any())
      throw NumericalError("transition row " + std::to_string(i) +
                           " is not a probability distribution");
  }
}

namespace {

struct ForwardBackward {
  Eigen::MatrixXd gamma;       // [T x k]
  Eigen::MatrixXd alpha;       // scaled forward variables
  Eigen::MatrixXd beta;        // scaled backward variables
  Eigen::MatrixXd emit_ratio;  // exp(logB - rowmax)
  Eigen::VectorXd scale;       // per-step normalizers of alpha
  Eigen::VectorXd shift;       // per-step max of logB
  double log_likelihood = 0.0;
};

// Scaled recursions; per-step emission likelihoods are shifted by their
// row maximum before exponentiation so underflow cannot occur.
ForwardBackward run_forward_backward(const HmmParams& params,
                                     const Eigen::Ref<const Eigen::MatrixXd>& obs) {
  const int k = params.k();
  const Eigen::Index T = obs.rows();

  ForwardBackward fb;
  fb.emit_ratio.resize(T, k);
  fb.shift.resize(T);
  Eigen::MatrixXd log_emit(T, k);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int i = 0; i < k; ++i) {
      log_emit(t, i) = log_density(params.regimes[static_cast<std::size_t>(i)],
                                   obs.row(t).transpose());
    }
    fb.shift(t) = log_emit.row(t).maxCoeff();
    fb.emit_ratio.row(t) = (log_emit.row(t).array() - fb.shift(t)).exp();
  }

  fb.alpha.resize(T, k);
  fb.scale.resize(T);
  Eigen::VectorXd forward =
      (params.pi0.array() * fb.emit_ratio.row(0).transpose().array()).matrix();
  fb.scale(0) = forward.sum();
  if (!(fb.scale(0) > 0.0))
    throw NumericalError("forward recursion collapsed at t = 0");
  fb.alpha.row(0) = forward.transpose() / fb.scale(0);
  for (Eigen::Index t = 1; t < T; ++t) {
    forward = (params.trans.transpose() * fb.alpha.row(t - 1).transpose())
                  .cwiseProduct(fb.emit_ratio.row(t).transpose());
    fb.scale(t) = forward.sum();
    if (!(fb.scale(t) > 0.0))
      throw NumericalError("forward recursion collapsed at t = " +
                           std::to_string(t));
    fb.alpha.row(t) = forward.transpose() / fb.scale(t);
  }
  fb.log_likelihood = fb.scale.array().log().sum() + fb.shift.sum();

  fb.beta.resize(T, k);
  fb.beta.row(T - 1).setOnes();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const Eigen::VectorXd weighted =
        fb.emit_ratio.row(t + 1).transpose().cwiseProduct(
            fb.beta.row(t + 1).transpose());
    fb.beta.row(t) = (params.trans * weighted).transpose() / fb.scale(t + 1);
  }

  fb.gamma.resize(T, k);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd row =
        fb.alpha.row(t).cwiseProduct(fb.beta.row(t)).transpose();
    const double total = row.sum();
    fb.gamma.row(t) = row.transpose() / total;
  }
  return fb;
}

}  // namespace

SmoothedPath forward_backward(const HmmParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& obs) {
  params.validate();
  if (obs.rows() < 1) throw InsufficientDataError("empty observation window");
  if (obs.cols() != params.dim())
    throw NumericalError("observation dimension does not match regimes");
  ForwardBackward fb = run_forward_backward(params, obs);
  return SmoothedPath{std::move(fb.gamma), fb.log_likelihood};
}

HmmParams sort_regimes_bull_first(const HmmParams& params, int pivot_asset,
                                  std::vector<int>* perm_out) {
  const int k = params.k();
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return params.regimes[static_cast<std::size_t>(a)].mean()(pivot_asset) >
           params.regimes[static_cast<std::size_t>(b)].mean()(pivot_asset);
  });

  HmmParams sorted;
  sorted.pi0.resize(k);
  sorted.trans.resize(k, k);
  for (int i = 0; i < k; ++i) {
    sorted.pi0(i) = params.pi0(order[static_cast<std::size_t>(i)]);
    sorted.regimes.push_back(
        params.regimes[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    for (int j = 0; j < k; ++j) {
      sorted.trans(i, j) = params.trans(order[static_cast<std::size_t>(i)],
                                        order[static_cast<std::size_t>(j)]);
    }
  }
  if (perm_out) *perm_out = order;
  return sorted;
}

HmmFit baum_welch(const Eigen::Ref<const Eigen::MatrixXd>& obs, int k,
                  const HmmFitConfig& config, Rng& rng) {
  const Eigen::Index T = obs.rows();
  const Eigen::Index n = obs.cols();
  if (k < 1) throw ConfigError("regime count must be >= 1");
  if (T <= static_cast<Eigen::Index>(k) * (n + 1))
    throw InsufficientDataError("window too short for the regime count");

  HmmFit fit;
  if (k == 1) {
    // The one-regime model is the classic mean/variance estimate.
    MvGaussian g = fit_gaussian(obs);
    fit.params.pi0 = Eigen::VectorXd::Ones(1);
    fit.params.trans = Eigen::MatrixXd::Ones(1, 1);
    fit.params.regimes.push_back(std::move(g));
    fit.log_likelihoods.push_back(
        forward_backward(fit.params, obs).log_likelihood);
    fit.converged = true;
    return fit;
  }

  const Eigen::VectorXd global_mean = obs.colwise().mean();
  const Eigen::MatrixXd centered = obs.rowwise() - global_mean.transpose();
  const Eigen::MatrixXd global_cov =
      centered.transpose() * centered / static_cast<double>(T - 1);
  const Eigen::VectorXd global_sd = global_cov.diagonal().array().sqrt();

  HmmParams params;
  params.pi0 = Eigen::VectorXd::Constant(k, 1.0 / k);
  params.trans = Eigen::MatrixXd::Constant(k, k, 0.1 / (k - 1));
  params.trans.diagonal().setConstant(0.9);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd mean = global_mean;
    for (Eigen::Index d = 0; d < n; ++d) {
      mean(d) += rng.uniform(-0.5, 0.5) * global_sd(d);
    }
    Eigen::MatrixXd cov = global_cov;
    cov.diagonal().array() += 1e-10;
    params.regimes.emplace_back(mean, cholesky_factor(cov, 0.0));
  }

  double previous_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iter; ++iter) {
    const ForwardBackward fb = run_forward_backward(params, obs);
    fit.log_likelihoods.push_back(fb.log_likelihood);

    const Eigen::VectorXd mass = fb.gamma.colwise().sum();
    for (int i = 0; i < k; ++i) {
      if (mass(i) < static_cast<double>(n + 1)) {
        throw RegimeCollapseError("regime " + std::to_string(i) +
                                  " collapsed during EM");
      }
    }

    // Transition responsibilities, accumulated over t.
    Eigen::MatrixXd xi_sum = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
      Eigen::MatrixXd xi(k, k);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          xi(i, j) = fb.alpha(t, i) * params.trans(i, j) *
                     fb.emit_ratio(t + 1, j) * fb.beta(t + 1, j);
        }
      }
      xi_sum += xi / xi.sum();
    }

    params.pi0 = fb.gamma.row(0).transpose();
    const Eigen::VectorXd row_mass =
        fb.gamma.topRows(T - 1).colwise().sum().transpose();
    for (int i = 0; i < k; ++i) {
      params.trans.row(i) = xi_sum.row(i) / row_mass(i);
      params.trans.row(i) /= params.trans.row(i).sum();
    }

    std::vector<MvGaussian> regimes;
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd weights = fb.gamma.col(i);
      const Eigen::VectorXd mean =
          (obs.transpose() * weights) / mass(i);
      const Eigen::MatrixXd dev = obs.rowwise() - mean.transpose();
      Eigen::MatrixXd cov =
          dev.transpose() * weights.asDiagonal() * dev / mass(i);
      cov.diagonal().array() += 1e-10;
      regimes.emplace_back(mean, cholesky_factor(cov, 0.0));
    }
    params.regimes = std::move(regimes);

    if (fb.log_likelihood - previous_ll < config.tol && iter > 0) {
      fit.converged = true;
      break;
    }
    previous_ll = fb.log_likelihood;
  }

  fit.params = sort_regimes_bull_first(params);
  return fit;
}

Eigen::MatrixXd simulate_hmm(const HmmParams& params,
                             const Eigen::Ref<const Eigen::VectorXd>& last_smoothed,
                             int horizon, Rng& rng) {
  params.validate();
  if (last_smoothed.size() != params.k())
    throw NumericalError("smoothed distribution size mismatch");
  if (std::abs(last_smoothed.sum() - 1.0) > 1e-9)
    throw NumericalError("smoothed distribution must sum to 1");

  Eigen::MatrixXd path(horizon, params.dim());
  int state = rng.categorical(last_smoothed);
  for (int t = 0; t < horizon; ++t) {
    state = rng.categorical(params.trans.row(state).transpose());
    path.row(t) =
        sample(params.regimes[static_cast<std::size_t>(state)], rng).transpose();
  }
  return path;
}

}  // namespace regimevar
