#pragma once

#include <Eigen/Dense>
#include <string>

#include "regimevar/gaussian.hpp"
#include "regimevar/nn/param_store.hpp"

namespace regimevar::nn {

/// The unconditioned, learnable per-regime Gaussian parameters sampled
/// from during simulation. Means are free, covariance factors are stored
/// as an unconstrained lower triangle with the diagonal in log-space, so
/// any parameter value yields a positive-definite covariance.
class GmmHead {
 public:
  GmmHead(int k, int dim) : k_(k), dim_(dim) {}

  int k() const { return k_; }
  int dim() const { return dim_; }

  void register_params(ParamStore& store) const;
  MvGaussian gaussian(const ParamStore& store, int regime) const;
  void set_from(ParamStore& store, int regime, const MvGaussian& g) const;

  std::string mean_name(int regime) const;
  std::string log_diag_name(int regime) const;
  std::string off_diag_name(int regime) const;

 private:
  int k_;
  int dim_;
};

struct SequenceLossValue {
  double loss = 0.0;
  long terms = 0;
};

/// Negative log-likelihood of the observations under the phi-weighted
/// mixture, summed over lookahead steps j = 1..J per time step. phi row p
/// corresponds to observation row offset + p; terms whose target index
/// leaves the window are dropped. The inner mixture uses log-sum-exp.
///
/// Gradients w.r.t. the GMM parameters are accumulated into the store and
/// d(loss)/d(phi) into d_phi (if non-null), both scaled by grad_scale.
SequenceLossValue sequence_loss(ParamStore& store, const GmmHead& head,
                                const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                const Eigen::Ref<const Eigen::MatrixXd>& obs,
                                Eigen::Index offset, int lookahead,
                                Eigen::MatrixXd* d_phi,
                                double grad_scale = 1.0);

/// reg = sum_i (mean_t phi_i(t))^2; lies in [1/k, 1], minimized at
/// balanced column means.
double balance_regularizer(const Eigen::Ref<const Eigen::MatrixXd>& phi);
Eigen::MatrixXd balance_regularizer_grad(
    const Eigen::Ref<const Eigen::MatrixXd>& phi);

/// Multiplicative balanced-incentive loss: (1 + weight * reg) * base.
double regularized_loss(double base, double reg, double weight);

struct CompositeLossValue {
  double total = 0.0;
  double base = 0.0;
  double reg = 0.0;
};

/// Full training objective: sequence loss scaled by the balance term.
/// Writes the complete d(total)/d(phi) into d_phi and the GMM gradients
/// into the store.
CompositeLossValue regularized_sequence_loss(
    ParamStore& store, const GmmHead& head,
    const Eigen::Ref<const Eigen::MatrixXd>& phi,
    const Eigen::Ref<const Eigen::MatrixXd>& obs, Eigen::Index offset,
    int lookahead, double reg_weight, Eigen::MatrixXd* d_phi);

}  // namespace regimevar::nn
