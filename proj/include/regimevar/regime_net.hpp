#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "regimevar/hmm.hpp"
#include "regimevar/nn/mixture_loss.hpp"
#include "regimevar/nn/param_store.hpp"
#include "regimevar/rng.hpp"

namespace regimevar {

enum class BackboneKind { Ffn, Tcn, Lstm };

std::string backbone_kind_name(BackboneKind kind);

/// Temporal backbone shape constants. FFN reads a flattened 10-day
/// receptive field through (32, 16, 8) tanh layers; the TCN stacks 7
/// causal convolutions with kernel 3 and doubling dilation (receptive
/// field 255); the LSTM runs one layer of hidden size 5 over the full
/// window.
struct BackboneSpec {
  BackboneKind kind = BackboneKind::Ffn;
  std::vector<int> ffn_hidden{32, 16, 8};
  int ffn_days = 10;
  int tcn_layers = 7;
  int tcn_channels = 3;
  int tcn_kernel = 3;
  int lstm_hidden = 5;

  /// Days of history an output is conditioned on (1 for the LSTM, whose
  /// receptive field is unbounded and only limited by the data).
  int receptive_field() const;
};

struct NormConstants {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // unbiased, strictly positive
};

/// Per-asset input normalization X' = (X - mean(X)) / var(X) -- division
/// by the variance, not the standard deviation.
std::pair<Eigen::MatrixXd, NormConstants> normalize_inputs(
    const Eigen::Ref<const Eigen::MatrixXd>& window);

struct RegimeNetModel {
  BackboneSpec spec;
  int k = 2;
  int lookahead = 5;
  nn::ParamStore params;
  nn::GmmHead gmm{2, 1};
  NormConstants norm;
  std::vector<std::string> asset_names;

  int dim() const { return gmm.dim(); }
};

struct TrainConfig {
  int window_days = 2000;
  int attempts = 5;
  int epochs = 200;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  double reg_weight = 0.0;  // 0 = regularizer off; 1 reproduces the default
  int k = 2;
  int lookahead = 5;
  std::uint64_t seed = 0;
};

struct TrainAttempt {
  std::vector<double> loss_curve;  // loss before each step, plus final
  double final_loss = 0.0;
  bool aborted = false;
  Eigen::VectorXd regime_shares;
};

struct TrainReport {
  std::vector<TrainAttempt> attempts;
  int selected = -1;
};

/// Registers all parameter tensors for the given shape; weights start at
/// zero until an initializer runs.
RegimeNetModel make_regime_net(const BackboneSpec& spec, int k, int n_assets,
                               int lookahead);

/// Per-layer uniform backbone init w ~ U(-1/sqrt(i), 1/sqrt(i)) with i the
/// layer's input units; GMM head at unit scale (means U(-1, 1), identity
/// factor).
void random_initialize(RegimeNetModel& model, Rng& rng);

/// Seeds the GMM head with the HMM's per-regime (mu, sigma), rescaled into
/// the model's normalized input space; backbone weights drawn per layer
/// from U(-1/sqrt(i), 1/sqrt(i)).
void hmm_initialize(RegimeNetModel& model, const HmmParams& hmm, Rng& rng);

/// Backbone forward pass over a normalized window; returns phi [Tp x k]
/// where row p corresponds to window row offset() + p.
struct NetForward {
  Eigen::MatrixXd phi;
  Eigen::Index offset = 0;
};
NetForward net_forward(const RegimeNetModel& model,
                       const Eigen::Ref<const Eigen::MatrixXd>& normalized);

/// Regime probabilities from the trailing receptive field of a raw return
/// history.
Eigen::VectorXd regime_probs(const RegimeNetModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& history);

/// In-sample phi over a raw window, using the model's stored norm
/// constants.
NetForward in_sample_regime_probs(
    const RegimeNetModel& model,
    const Eigen::Ref<const Eigen::MatrixXd>& window);

/// One full forward/backward sweep of the training objective on a
/// normalized window: fills the model's gradient buffers and returns the
/// (optionally regularized) loss. This is exactly the per-epoch step the
/// trainer runs between optimizer updates.
double training_loss_and_gradients(RegimeNetModel& model,
                                   const Eigen::Ref<const Eigen::MatrixXd>& normalized,
                                   double reg_weight);

/// Best-of-N training on the trailing config.window_days rows of the
/// window. Each attempt minimizes the (optionally regularized) sequence
/// loss by full-window AdaMax; the minimum-final-loss attempt wins, ties
/// broken by lowest attempt index. Pass hmm_init to seed the GMM head from
/// an HMM fit (identical across attempts).
RegimeNetModel train_regime_net(const Eigen::Ref<const Eigen::MatrixXd>& window,
                                const BackboneSpec& spec,
                                const TrainConfig& config,
                                const HmmParams* hmm_init = nullptr,
                                TrainReport* report = nullptr);

/// One simulated path: at each step the model is applied to the current
/// receptive field, a regime is drawn from phi, the day's return from that
/// regime's Gaussian, and the simulated day is appended to the rolling
/// history. Returned returns are de-normalized to raw scale.
Eigen::MatrixXd simulate_path(const RegimeNetModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& history,
                              int horizon, Rng& rng);

/// Many paths compounded to horizon returns [paths x n]; the backbone
/// state is primed on the history once and cloned per path.
Eigen::MatrixXd simulate_horizon_returns(
    const RegimeNetModel& model,
    const Eigen::Ref<const Eigen::MatrixXd>& history, int horizon, int paths,
    Rng& rng);

}  // namespace regimevar
