#include "regimevar/nn/mixture_loss.hpp"

#include <cmath>
#include <limits>

#include "regimevar/errors.hpp"

namespace regimevar::nn {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

std::string GmmHead::mean_name(int regime) const {
  return "gmm.mean." + std::to_string(regime);
}
std::string GmmHead::log_diag_name(int regime) const {
  return "gmm.logdiag." + std::to_string(regime);
}
std::string GmmHead::off_diag_name(int regime) const {
  return "gmm.off." + std::to_string(regime);
}

void GmmHead::register_params(ParamStore& store) const {
  const int off_count = dim_ * (dim_ - 1) / 2;
  for (int i = 0; i < k_; ++i) {
    store.add(mean_name(i), dim_, 1);
    store.add(log_diag_name(i), dim_, 1);
    if (off_count > 0) store.add(off_diag_name(i), off_count, 1);
  }
}

MvGaussian GmmHead::gaussian(const ParamStore& store, int regime) const {
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(dim_, dim_);
  factor.diagonal() =
      store.value(log_diag_name(regime)).col(0).array().exp().matrix();
  if (dim_ > 1) {
    const Eigen::MatrixXd& off = store.value(off_diag_name(regime));
    int idx = 0;
    for (int r = 1; r < dim_; ++r) {
      for (int c = 0; c < r; ++c) factor(r, c) = off(idx++, 0);
    }
  }
  return MvGaussian(store.value(mean_name(regime)).col(0), factor);
}

void GmmHead::set_from(ParamStore& store, int regime,
                       const MvGaussian& g) const {
  if (g.dim() != dim_)
    throw NumericalError("GMM head dimension mismatch");
  store.value(mean_name(regime)).col(0) = g.mean();
  store.value(log_diag_name(regime)).col(0) =
      g.factor().diagonal().array().log().matrix();
  if (dim_ > 1) {
    Eigen::MatrixXd& off = store.value(off_diag_name(regime));
    int idx = 0;
    for (int r = 1; r < dim_; ++r) {
      for (int c = 0; c < r; ++c) off(idx++, 0) = g.factor()(r, c);
    }
  }
}

SequenceLossValue sequence_loss(ParamStore& store, const GmmHead& head,
                                const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                const Eigen::Ref<const Eigen::MatrixXd>& obs,
                                Eigen::Index offset, int lookahead,
                                Eigen::MatrixXd* d_phi, double grad_scale) {
  const int k = head.k();
  const int n = head.dim();
  const Eigen::Index T = obs.rows();
  const Eigen::Index rows = phi.rows();
  if (phi.cols() != k) throw NumericalError("phi column count != k");
  if (obs.cols() != n) throw NumericalError("observation width != GMM dim");
  if (lookahead < 1) throw ConfigError("lookahead must be >= 1");

  // Per-regime factors and whitened residuals are shared across all
  // (t, j) pairs hitting the same target row.
  std::vector<MvGaussian> gaussians;
  gaussians.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) gaussians.push_back(head.gaussian(store, i));

  Eigen::MatrixXd log_norm(T, k);      // log N_i(x_s)
  std::vector<Eigen::MatrixXd> white(static_cast<std::size_t>(k));
  std::vector<Eigen::MatrixXd> pulled(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const MvGaussian& g = gaussians[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd residual =
        (obs.rowwise() - g.mean().transpose()).transpose();  // [n x T]
    const Eigen::MatrixXd z =
        g.factor().triangularView<Eigen::Lower>().solve(residual);
    const Eigen::MatrixXd lz = g.factor()
                                   .triangularView<Eigen::Lower>()
                                   .transpose()
                                   .solve(z);  // L^{-T} z
    const double log_det = g.factor().diagonal().array().log().sum();
    log_norm.col(i) = (-0.5 * n * kLogTwoPi - log_det -
                       0.5 * z.colwise().squaredNorm().array())
                          .matrix()
                          .transpose();
    white[static_cast<std::size_t>(i)] = z;
    pulled[static_cast<std::size_t>(i)] = lz;
  }

  if (d_phi) *d_phi = Eigen::MatrixXd::Zero(rows, k);
  // Accumulated responsibility weight per (target row, regime).
  Eigen::MatrixXd target_weight = Eigen::MatrixXd::Zero(T, k);

  SequenceLossValue result;
  Eigen::ArrayXd scores(k);
  for (Eigen::Index p = 0; p < rows; ++p) {
    const Eigen::Index t = offset + p;
    for (int j = 1; j <= lookahead; ++j) {
      const Eigen::Index s = t + j;
      if (s >= T) break;
      for (int i = 0; i < k; ++i) {
        const double w = phi(p, i);
        scores(i) = w > 0.0 ? std::log(w) + log_norm(s, i)
                            : -std::numeric_limits<double>::infinity();
      }
      const double peak = scores.maxCoeff();
      if (!std::isfinite(peak)) {
        throw NumericalError("non-finite mixture density at window index " +
                             std::to_string(s));
      }
      const double log_mix = peak + std::log((scores - peak).exp().sum());
      if (!std::isfinite(log_mix)) {
        throw NumericalError("non-finite mixture density at window index " +
                             std::to_string(s));
      }
      result.loss -= log_mix;
      ++result.terms;
      for (int i = 0; i < k; ++i) {
        if (d_phi) {
          (*d_phi)(p, i) -= grad_scale * std::exp(log_norm(s, i) - log_mix);
        }
        if (phi(p, i) > 0.0) {
          target_weight(s, i) += std::exp(scores(i) - log_mix);
        }
      }
    }
  }

  // d(loss)/d(mu_i) and d(loss)/d(L_i), pushed through the log-diagonal
  // parametrization.
  for (int i = 0; i < k; ++i) {
    const MvGaussian& g = gaussians[static_cast<std::size_t>(i)];
    const Eigen::VectorXd weights = target_weight.col(i);
    const double total_weight = weights.sum();
    if (total_weight == 0.0) continue;

    Eigen::VectorXd d_mean =
        -(pulled[static_cast<std::size_t>(i)] * weights);
    store.grad(head.mean_name(i)).col(0) += grad_scale * d_mean;

    // d(-logN)/dL = diag(1/L_jj) - tril((L^{-T} z) z^T), weighted per row.
    Eigen::MatrixXd d_factor =
        -(pulled[static_cast<std::size_t>(i)] * weights.asDiagonal() *
          white[static_cast<std::size_t>(i)].transpose());
    d_factor.diagonal().array() +=
        total_weight / g.factor().diagonal().array();

    Eigen::MatrixXd& g_logdiag = store.grad(head.log_diag_name(i));
    g_logdiag.col(0).array() += grad_scale * d_factor.diagonal().array() *
                                g.factor().diagonal().array();
    if (n > 1) {
      Eigen::MatrixXd& g_off = store.grad(head.off_diag_name(i));
      int idx = 0;
      for (int r = 1; r < n; ++r) {
        for (int c = 0; c < r; ++c) {
          g_off(idx++, 0) += grad_scale * d_factor(r, c);
        }
      }
    }
  }
  return result;
}

double balance_regularizer(const Eigen::Ref<const Eigen::MatrixXd>& phi) {
  if (phi.rows() == 0) throw InsufficientDataError("empty phi matrix");
  return phi.colwise().mean().array().square().sum();
}

Eigen::MatrixXd balance_regularizer_grad(
    const Eigen::Ref<const Eigen::MatrixXd>& phi) {
  const Eigen::RowVectorXd means = phi.colwise().mean();
  const double scale = 2.0 / static_cast<double>(phi.rows());
  return (scale * means).replicate(phi.rows(), 1);
}

double regularized_loss(double base, double reg, double weight) {
  return (1.0 + weight * reg) * base;
}

CompositeLossValue regularized_sequence_loss(
    ParamStore& store, const GmmHead& head,
    const Eigen::Ref<const Eigen::MatrixXd>& phi,
    const Eigen::Ref<const Eigen::MatrixXd>& obs, Eigen::Index offset,
    int lookahead, double reg_weight, Eigen::MatrixXd* d_phi) {
  CompositeLossValue out;
  if (reg_weight == 0.0) {
    const SequenceLossValue base =
        sequence_loss(store, head, phi, obs, offset, lookahead, d_phi, 1.0);
    out.base = base.loss;
    out.reg = 0.0;
    out.total = base.loss;
    return out;
  }
  out.reg = balance_regularizer(phi);
  const double factor = 1.0 + reg_weight * out.reg;
  const SequenceLossValue base =
      sequence_loss(store, head, phi, obs, offset, lookahead, d_phi, factor);
  out.base = base.loss;
  out.total = factor * base.loss;
  if (d_phi) {
    *d_phi += (reg_weight * base.loss) * balance_regularizer_grad(phi);
  }
  return out;
}

}  // namespace regimevar::nn
