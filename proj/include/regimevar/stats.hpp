#pragma once

#include <Eigen/Dense>
#include <vector>

namespace regimevar {

/// Empirical quantile with linear interpolation between order statistics
/// (type-7). p = 0 gives the minimum, p = 1 the maximum.
double quantile(std::vector<double> values, double p);
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Adjusted Fisher-Pearson sample skewness; requires >= 3 observations.
double sample_skewness(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Regularized incomplete beta function I_x(a, b).
double reg_incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double dof);

/// Two-sided p-value of a Student-t statistic.
double student_t_two_sided_p(double t, double dof);

}  // namespace regimevar
