#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "regimevar/errors.hpp"
#include "regimevar/gaussian.hpp"

using namespace regimevar;

namespace {

MvGaussian random_gaussian(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd mean(n);
  for (int i = 0; i < n; ++i) mean(i) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < r; ++c) factor(r, c) = rng.uniform(-0.5, 0.5);
    factor(r, r) = rng.uniform(0.3, 1.5);
  }
  return MvGaussian(mean, factor);
}

// Dense-algebra density oracle with an explicit inverse and determinant.
double dense_log_density(const MvGaussian& g, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd cov = g.covariance();
  const Eigen::VectorXd diff = x - g.mean();
  const double quad = diff.dot(cov.inverse() * diff);
  return -0.5 * (g.dim() * std::log(2.0 * M_PI) +
                 std::log(cov.determinant()) + quad);
}

}  // namespace

TEST_CASE("log_density analytic values") {
  const MvGaussian std1(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  CHECK(log_density(std1, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(-0.9189385332).epsilon(1e-10));

  const MvGaussian std2(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK(log_density(std2, Eigen::VectorXd::Zero(2)) ==
        doctest::Approx(-1.8378770664).epsilon(1e-10));

  CHECK_THROWS_AS(log_density(std2, Eigen::VectorXd::Zero(3)),
                  NumericalError);
}

TEST_CASE("log_density matches a dense-matrix oracle") {
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    const MvGaussian g = random_gaussian(3, seed);
    Rng rng(seed + 100);
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = rng.uniform(-2.0, 2.0);
    CHECK(std::fabs(log_density(g, x) - dense_log_density(g, x)) < 1e-10);
  }
}

TEST_CASE("exp(log_density) integrates to one on a 1-d grid") {
  const MvGaussian g(Eigen::VectorXd::Constant(1, 0.3),
                     Eigen::MatrixXd::Identity(1, 1));
  const double lo = 0.3 - 8.0, hi = 0.3 + 8.0;
  const int steps = 20000;
  const double h = (hi - lo) / steps;
  double sum = 0.0;
  for (int i = 0; i <= steps; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, lo + i * h);
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    sum += w * std::exp(log_density(g, x));
  }
  CHECK(std::fabs(sum * h - 1.0) < 1e-4);
}

TEST_CASE("sampling") {
  SUBCASE("zero factor returns the mean exactly") {
    const MvGaussian degenerate = MvGaussian::unchecked(
        Eigen::VectorXd::Constant(2, 1.5), Eigen::MatrixXd::Zero(2, 2));
    Rng rng(5);
    const Eigen::VectorXd draw = sample(degenerate, rng);
    CHECK(draw(0) == 1.5);
    CHECK(draw(1) == 1.5);
  }
  SUBCASE("sample moments match the distribution") {
    const MvGaussian g(Eigen::VectorXd::Constant(1, 0.5),
                       Eigen::MatrixXd::Constant(1, 1, 2.0));  // variance 4
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sample(g, rng)(0);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::fabs(mean - 0.5) < 0.02);
    CHECK(std::fabs(var - 4.0) < 0.1);
  }
  SUBCASE("identical seeds give identical streams") {
    const MvGaussian g = random_gaussian(3, 42);
    Rng a(7), b(7);
    for (int i = 0; i < 50; ++i) {
      CHECK((sample(g, a) - sample(g, b)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("fit_gaussian") {
  SUBCASE("identical samples are singular") {
    Eigen::MatrixXd samples = Eigen::MatrixXd::Constant(10, 2, 0.3);
    CHECK_THROWS_AS(fit_gaussian(samples), NumericalError);
  }
  SUBCASE("two points give the unbiased variance") {
    Eigen::MatrixXd samples(2, 1);
    samples << 0.0, 2.0;
    const MvGaussian g = fit_gaussian(samples);
    CHECK(g.mean()(0) == doctest::Approx(1.0));
    CHECK(g.covariance()(0, 0) == doctest::Approx(2.0));
  }
  SUBCASE("too few samples") {
    Eigen::MatrixXd samples(2, 2);
    samples << 0.0, 1.0, 2.0, 3.0;
    CHECK_THROWS_AS(fit_gaussian(samples), InsufficientDataError);
  }
  SUBCASE("recovers a known 3-d Gaussian from 100k draws") {
    const MvGaussian truth = random_gaussian(3, 2024);
    Rng rng(77);
    Eigen::MatrixXd samples(100000, 3);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      samples.row(i) = sample(truth, rng).transpose();
    }
    const MvGaussian fitted = fit_gaussian(samples);
    const Eigen::VectorXd sd = truth.covariance().diagonal().array().sqrt();
    for (int d = 0; d < 3; ++d) {
      CHECK(std::fabs(fitted.mean()(d) - truth.mean()(d)) < 0.02 * sd(d));
    }
  }
}

TEST_CASE("factor roundtrip reproduces the factor") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const MvGaussian g = random_gaussian(4, seed);
    const Eigen::MatrixXd refactored = cholesky_factor(g.covariance(), 0.0);
    CHECK((refactored - g.factor()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gaussian constructor validates the factor") {
  Eigen::MatrixXd upper(2, 2);
  upper << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(MvGaussian(Eigen::VectorXd::Zero(2), upper),
                  NumericalError);
  Eigen::MatrixXd negative = Eigen::MatrixXd::Identity(2, 2);
  negative(1, 1) = -1.0;
  CHECK_THROWS_AS(MvGaussian(Eigen::VectorXd::Zero(2), negative),
                  NumericalError);
}

TEST_CASE("mixture behaviour") {
  const MvGaussian g = random_gaussian(2, 31);
  SUBCASE("degenerate k=1 mixture equals its component") {
    GaussianMixture mix(Eigen::VectorXd::Constant(1, 1.0), {g});
    Rng rng(3);
    Eigen::VectorXd x(2);
    x << 0.2, -0.4;
    CHECK(log_density(mix, x) == doctest::Approx(log_density(g, x)));
    Rng a(17), b(17);
    (void)b.uniform();  // the mixture consumes one uniform picking its component
    CHECK((sample(mix, a) - sample(g, b)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("weights are renormalized") {
    GaussianMixture mix(Eigen::VectorXd::Constant(2, 5.0),
                        {g, random_gaussian(2, 32)});
    CHECK(mix.weights.sum() == doctest::Approx(1.0));
    CHECK(mix.weights(0) == doctest::Approx(0.5));
  }
  SUBCASE("invalid weights are rejected") {
    Eigen::VectorXd negative(1);
    negative << -1.0;
    CHECK_THROWS_AS(GaussianMixture(negative, {g}), NumericalError);
  }
}
