#pragma once

#include <Eigen/Dense>
#include <vector>

#include "regimevar/rng.hpp"

namespace regimevar {

/// Multivariate normal carried as its lower-triangular Cholesky factor
/// (sigma = L * L^T). Sampling and density evaluation both consume the
/// factor directly, and storing it keeps sigma positive definite by
/// construction.
class MvGaussian {
 public:
  MvGaussian(Eigen::VectorXd mean, Eigen::MatrixXd factor);

  /// Skips validation; lets tests build degenerate (zero-factor)
  /// distributions.
  static MvGaussian unchecked(Eigen::VectorXd mean, Eigen::MatrixXd factor);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& factor() const { return factor_; }
  Eigen::MatrixXd covariance() const { return factor_ * factor_.transpose(); }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  MvGaussian() = default;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
};

double log_density(const MvGaussian& g,
                   const Eigen::Ref<const Eigen::VectorXd>& x);

Eigen::VectorXd sample(const MvGaussian& g, Rng& rng);

/// Lower Cholesky factor of cov; on failure retries once with
/// retry_jitter added to the diagonal, then throws NumericalError.
Eigen::MatrixXd cholesky_factor(Eigen::MatrixXd cov, double retry_jitter);

/// Sample mean and unbiased sample covariance, factored. Requires more
/// samples than dimensions.
MvGaussian fit_gaussian(const Eigen::Ref<const Eigen::MatrixXd>& samples);

struct GaussianMixture {
  GaussianMixture(Eigen::VectorXd weights, std::vector<MvGaussian> components);

  Eigen::VectorXd weights;
  std::vector<MvGaussian> components;

  Eigen::Index size() const { return weights.size(); }
};

double log_density(const GaussianMixture& mix,
                   const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd sample(const GaussianMixture& mix, Rng& rng);

}  // namespace regimevar
