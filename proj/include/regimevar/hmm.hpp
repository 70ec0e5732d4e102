#pragma once

#include <Eigen/Dense>
#include <vector>

#include "regimevar/gaussian.hpp"
#include "regimevar/rng.hpp"

namespace regimevar {

/// k-regime Gaussian hidden Markov model parameters: initial state
/// distribution, row-stochastic transition matrix, per-regime Gaussians.
struct HmmParams {
  Eigen::VectorXd pi0;
  Eigen::MatrixXd trans;
  std::vector<MvGaussian> regimes;

  int k() const { return static_cast<int>(pi0.size()); }
  Eigen::Index dim() const { return regimes.empty() ? 0 : regimes[0].dim(); }
  void validate() const;
};

struct SmoothedPath {
  Eigen::MatrixXd probs;  // [T x k], rows sum to 1
  double log_likelihood = 0.0;
};

/// Scaled forward-backward recursions; exact smoothed posteriors and the
/// window log-likelihood from the scaling constants.
SmoothedPath forward_backward(const HmmParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& obs);

struct HmmFitConfig {
  double tol = 1e-6;
  int max_iter = 500;
};

struct HmmFit {
  HmmParams params;
  std::vector<double> log_likelihoods;  // one per EM iteration
  bool converged = false;
};

/// Baum-Welch EM. k = 1 reduces exactly to fit_gaussian. Throws
/// RegimeCollapseError when a regime's responsibility mass drops below
/// dim + 1 effective samples; callers retry with a fresh seed.
/// Returned regimes are sorted bull-first (descending mean of asset 0).
HmmFit baum_welch(const Eigen::Ref<const Eigen::MatrixXd>& obs, int k,
                  const HmmFitConfig& config, Rng& rng);

/// Monte-Carlo simulation: the current regime is drawn from the smoothed
/// distribution, then each day transitions row-wise through trans and
/// emits from that regime's Gaussian. Returns [horizon x n].
Eigen::MatrixXd simulate_hmm(const HmmParams& params,
                             const Eigen::Ref<const Eigen::VectorXd>& last_smoothed,
                             int horizon, Rng& rng);

/// Reorders regimes by descending mean of pivot_asset (bull = index 0);
/// if perm is non-null it receives the applied permutation
/// (perm[new_index] = old_index).
HmmParams sort_regimes_bull_first(const HmmParams& params, int pivot_asset = 0,
                                  std::vector<int>* perm = nullptr);

}  // namespace regimevar
