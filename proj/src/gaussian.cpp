#include "regimevar/gaussian.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "regimevar/errors.hpp"

namespace regimevar {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

MvGaussian::MvGaussian(Eigen::VectorXd mean, Eigen::MatrixXd factor)
    : mean_(std::move(mean)), factor_(std::move(factor)) {
  if (factor_.rows() != mean_.size() || factor_.cols() != mean_.size())
    throw NumericalError("covariance factor shape does not match mean");
  for (Eigen::Index i = 0; i < factor_.rows(); ++i) {
    if (!(factor_(i, i) > 0.0))
      throw NumericalError("covariance factor diagonal must be positive");
    for (Eigen::Index j = i + 1; j < factor_.cols(); ++j) {
      if (factor_(i, j) != 0.0)
        throw NumericalError("covariance factor must be lower triangular");
    }
  }
}

MvGaussian MvGaussian::unchecked(Eigen::VectorXd mean, Eigen::MatrixXd factor) {
  MvGaussian g;
  g.mean_ = std::move(mean);
  g.factor_ = std::move(factor);
  return g;
}

double log_density(const MvGaussian& g,
                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != g.dim())
    throw NumericalError("log_density dimension mismatch");
  const Eigen::VectorXd z = g.factor()
                                .triangularView<Eigen::Lower>()
                                .solve(x - g.mean());
  const double log_det = g.factor().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(g.dim()) * kLogTwoPi - log_det -
         0.5 * z.squaredNorm();
}

Eigen::VectorXd sample(const MvGaussian& g, Rng& rng) {
  Eigen::VectorXd z(g.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return g.mean() + g.factor() * z;
}

Eigen::MatrixXd cholesky_factor(Eigen::MatrixXd cov, double retry_jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success &&
      (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
    return llt.matrixL();
  }
  if (retry_jitter > 0.0) {
    cov.diagonal().array() += retry_jitter;
    Eigen::LLT<Eigen::MatrixXd> retry(cov);
    if (retry.info() == Eigen::Success &&
        (retry.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
      return retry.matrixL();
    }
  }
  throw NumericalError("covariance is not positive definite");
}

MvGaussian fit_gaussian(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index n = samples.cols();
  if (m <= n)
    throw InsufficientDataError(
        "need more samples than dimensions to fit a Gaussian");
  const Eigen::VectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(m - 1);
  const double jitter = 1e-10 * cov.trace() / static_cast<double>(n);
  return MvGaussian(mean, cholesky_factor(cov, jitter));
}

GaussianMixture::GaussianMixture(Eigen::VectorXd w,
                                 std::vector<MvGaussian> comps)
    : weights(std::move(w)), components(std::move(comps)) {
  if (weights.size() != static_cast<Eigen::Index>(components.size()))
    throw NumericalError("mixture weight count must match component count");
  if (weights.size() == 0) throw NumericalError("empty mixture");
  if ((weights.array() < 0.0).any())
    throw NumericalError("mixture weights must be non-negative");
  const double total = weights.sum();
  if (!(total > 0.0)) throw NumericalError("mixture weights sum to zero");
  weights /= total;
}

double log_density(const GaussianMixture& mix,
                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::ArrayXd terms(mix.size());
  for (Eigen::Index i = 0; i < mix.size(); ++i) {
    terms(i) = mix.weights(i) > 0.0
                   ? std::log(mix.weights(i)) + log_density(mix.components[i], x)
                   : -std::numeric_limits<double>::infinity();
  }
  const double peak = terms.maxCoeff();
  return peak + std::log((terms - peak).exp().sum());
}

Eigen::VectorXd sample(const GaussianMixture& mix, Rng& rng) {
  const int i = rng.categorical(mix.weights);
  return sample(mix.components[static_cast<std::size_t>(i)], rng);
}

}  // namespace regimevar
