#include "regimevar/regime_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "regimevar/errors.hpp"
#include "regimevar/nn/layers.hpp"

namespace regimevar {

namespace {

constexpr std::uint64_t kAttemptTag = 0x5245474e45545452ULL;

std::string ffn_layer_id(int i) { return "ffn.l" + std::to_string(i); }
std::string tcn_layer_id(int i) { return "tcn.l" + std::to_string(i); }

int feature_dim(const BackboneSpec& spec) {
  switch (spec.kind) {
    case BackboneKind::Ffn:
      return spec.ffn_hidden.back();
    case BackboneKind::Tcn:
      return spec.tcn_channels;
    case BackboneKind::Lstm:
      return spec.lstm_hidden;
  }
  throw ConfigError("unknown backbone kind");
}

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
}

// Backbone weights are drawn per layer from U(-1/sqrt(i), 1/sqrt(i)) with
// i the layer's input units; biases stay zero.
void initialize_backbone(RegimeNetModel& model, Rng& rng) {
  nn::ParamStore& store = model.params;
  const int n = model.dim();
  switch (model.spec.kind) {
    case BackboneKind::Ffn: {
      for (std::size_t i = 0; i < model.spec.ffn_hidden.size(); ++i) {
        Eigen::MatrixXd& W = store.value(ffn_layer_id(static_cast<int>(i)) + ".W");
        fill_uniform(W, 1.0 / std::sqrt(static_cast<double>(W.cols())), rng);
      }
      break;
    }
    case BackboneKind::Tcn: {
      for (int i = 0; i < model.spec.tcn_layers; ++i) {
        Eigen::MatrixXd& W = store.value(tcn_layer_id(i) + ".W");
        fill_uniform(W, 1.0 / std::sqrt(static_cast<double>(W.cols())), rng);
      }
      break;
    }
    case BackboneKind::Lstm: {
      const double bound =
          1.0 / std::sqrt(static_cast<double>(n + model.spec.lstm_hidden));
      fill_uniform(store.value("lstm.W"), bound, rng);
      fill_uniform(store.value("lstm.U"), bound, rng);
      break;
    }
  }
  Eigen::MatrixXd& head_w = store.value("head.W");
  fill_uniform(head_w, 1.0 / std::sqrt(static_cast<double>(head_w.cols())),
               rng);
}

struct ForwardCtx {
  std::vector<nn::DenseCache> dense;
  std::vector<nn::ConvCache> conv;
  nn::LstmCache lstm;
  nn::DenseCache head;
  Eigen::MatrixXd ffn_input;
  Eigen::MatrixXd phi;
  Eigen::Index offset = 0;
  Eigen::Index total_rows = 0;
};

Eigen::MatrixXd flatten_receptive_fields(
    const Eigen::Ref<const Eigen::MatrixXd>& x, int r) {
  const Eigen::Index T = x.rows();
  const Eigen::Index n = x.cols();
  const Eigen::Index rows = T - r + 1;
  Eigen::MatrixXd flat(rows, static_cast<Eigen::Index>(r) * n);
  for (Eigen::Index p = 0; p < rows; ++p) {
    for (int d = 0; d < r; ++d) {
      flat.block(p, static_cast<Eigen::Index>(d) * n, 1, n) = x.row(p + d);
    }
  }
  return flat;
}

void forward_with_cache(const RegimeNetModel& model,
                        const Eigen::Ref<const Eigen::MatrixXd>& normalized,
                        ForwardCtx& ctx) {
  const nn::ParamStore& store = model.params;
  const Eigen::Index T = normalized.rows();
  const int r = model.spec.receptive_field();
  if (T < r) throw InsufficientDataError("history shorter than receptive field");
  ctx.total_rows = T;

  Eigen::MatrixXd features;
  switch (model.spec.kind) {
    case BackboneKind::Ffn: {
      ctx.offset = r - 1;
      ctx.ffn_input = flatten_receptive_fields(normalized, r);
      ctx.dense.resize(model.spec.ffn_hidden.size());
      Eigen::MatrixXd h = ctx.ffn_input;
      for (std::size_t i = 0; i < model.spec.ffn_hidden.size(); ++i) {
        h = nn::dense_forward(store, ffn_layer_id(static_cast<int>(i)), h,
                              true, &ctx.dense[i]);
      }
      features = std::move(h);
      break;
    }
    case BackboneKind::Tcn: {
      ctx.offset = r - 1;
      ctx.conv.resize(static_cast<std::size_t>(model.spec.tcn_layers));
      Eigen::MatrixXd h = normalized;
      for (int i = 0; i < model.spec.tcn_layers; ++i) {
        h = nn::causal_dilated_conv_forward(
            store, tcn_layer_id(i), h, 1 << i, true,
            &ctx.conv[static_cast<std::size_t>(i)]);
      }
      features = h.bottomRows(T - ctx.offset);
      break;
    }
    case BackboneKind::Lstm: {
      ctx.offset = 0;
      const Eigen::VectorXd zero =
          Eigen::VectorXd::Zero(model.spec.lstm_hidden);
      features = nn::lstm_forward(store, "lstm", normalized, zero, zero,
                                  &ctx.lstm);
      break;
    }
  }
  ctx.phi = nn::regime_head(store, "head", features, &ctx.head);
}

void backward_from_phi(RegimeNetModel& model, ForwardCtx& ctx,
                       const Eigen::MatrixXd& d_phi) {
  nn::ParamStore& store = model.params;
  const Eigen::MatrixXd d_logits = nn::softmax_rows_backward(ctx.phi, d_phi);
  Eigen::MatrixXd d_features =
      nn::dense_backward(store, "head", ctx.head, d_logits, false);

  switch (model.spec.kind) {
    case BackboneKind::Ffn: {
      Eigen::MatrixXd d = std::move(d_features);
      for (int i = static_cast<int>(model.spec.ffn_hidden.size()) - 1; i >= 0;
           --i) {
        d = nn::dense_backward(store, ffn_layer_id(i),
                               ctx.dense[static_cast<std::size_t>(i)], d,
                               true);
      }
      break;
    }
    case BackboneKind::Tcn: {
      Eigen::MatrixXd d =
          Eigen::MatrixXd::Zero(ctx.total_rows, model.spec.tcn_channels);
      d.bottomRows(d_features.rows()) = d_features;
      for (int i = model.spec.tcn_layers - 1; i >= 0; --i) {
        d = nn::causal_dilated_conv_backward(
            store, tcn_layer_id(i), ctx.conv[static_cast<std::size_t>(i)], d,
            true);
      }
      break;
    }
    case BackboneKind::Lstm: {
      nn::lstm_backward(store, "lstm", ctx.lstm, d_features);
      break;
    }
  }
}

// Reorders GMM regimes bull-first (descending mean of asset 0 in
// normalized scale, which preserves the raw-scale order) and permutes the
// head's output rows to match.
void sort_model_regimes(RegimeNetModel& model) {
  const int k = model.k;
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return model.params.value(model.gmm.mean_name(a))(0, 0) >
           model.params.value(model.gmm.mean_name(b))(0, 0);
  });
  if (std::is_sorted(order.begin(), order.end())) return;

  std::vector<MvGaussian> regimes;
  regimes.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    regimes.push_back(
        model.gmm.gaussian(model.params, order[static_cast<std::size_t>(i)]));
  }
  for (int i = 0; i < k; ++i) {
    model.gmm.set_from(model.params, i, regimes[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXd head_w = model.params.value("head.W");
  const Eigen::MatrixXd head_b = model.params.value("head.b");
  for (int i = 0; i < k; ++i) {
    model.params.value("head.W").row(i) =
        head_w.row(order[static_cast<std::size_t>(i)]);
    model.params.value("head.b").row(i) =
        head_b.row(order[static_cast<std::size_t>(i)]);
  }
}

// Rolling backbone state for simulation. Primed once on the history and
// cloned per path.
struct SimState {
  Eigen::MatrixXd window;                // FFN: [r x n], oldest row first
  std::vector<Eigen::MatrixXd> rings;    // TCN: rings[0] input, rings[j] layer j-1 output
  Eigen::VectorXd h, c;                  // LSTM
};

std::vector<Eigen::Index> tcn_ring_sizes(const BackboneSpec& spec) {
  std::vector<Eigen::Index> sizes;
  for (int j = 0; j < spec.tcn_layers; ++j) {
    sizes.push_back(static_cast<Eigen::Index>(spec.tcn_kernel - 1) * (1 << j) +
                    1);
  }
  sizes.push_back(1);
  return sizes;
}

SimState prime_state(const RegimeNetModel& model,
                     const Eigen::Ref<const Eigen::MatrixXd>& normalized) {
  const int r = model.spec.receptive_field();
  if (normalized.rows() < r)
    throw InsufficientDataError("history shorter than receptive field");

  SimState state;
  switch (model.spec.kind) {
    case BackboneKind::Ffn: {
      state.window = normalized.bottomRows(r);
      break;
    }
    case BackboneKind::Tcn: {
      const Eigen::MatrixXd slice = normalized.bottomRows(r);
      const std::vector<Eigen::Index> sizes = tcn_ring_sizes(model.spec);
      state.rings.resize(sizes.size());
      state.rings[0] = slice.bottomRows(sizes[0]);
      Eigen::MatrixXd h = slice;
      for (int i = 0; i < model.spec.tcn_layers; ++i) {
        h = nn::causal_dilated_conv_forward(model.params, tcn_layer_id(i), h,
                                            1 << i, true);
        state.rings[static_cast<std::size_t>(i) + 1] =
            h.bottomRows(sizes[static_cast<std::size_t>(i) + 1]);
      }
      break;
    }
    case BackboneKind::Lstm: {
      state.h = Eigen::VectorXd::Zero(model.spec.lstm_hidden);
      state.c = Eigen::VectorXd::Zero(model.spec.lstm_hidden);
      for (Eigen::Index t = 0; t < normalized.rows(); ++t) {
        nn::lstm_step(model.params, "lstm", normalized.row(t).transpose(),
                      state.h, state.c);
      }
      break;
    }
  }
  return state;
}

void advance_state(const RegimeNetModel& model, SimState& state,
                   const Eigen::Ref<const Eigen::RowVectorXd>& x_norm) {
  switch (model.spec.kind) {
    case BackboneKind::Ffn: {
      const Eigen::Index r = state.window.rows();
      state.window.topRows(r - 1) = state.window.bottomRows(r - 1).eval();
      state.window.row(r - 1) = x_norm;
      break;
    }
    case BackboneKind::Tcn: {
      auto push = [](Eigen::MatrixXd& ring, const Eigen::RowVectorXd& row) {
        const Eigen::Index m = ring.rows();
        if (m > 1) ring.topRows(m - 1) = ring.bottomRows(m - 1).eval();
        ring.row(m - 1) = row;
      };
      push(state.rings[0], x_norm);
      for (int i = 0; i < model.spec.tcn_layers; ++i) {
        const Eigen::MatrixXd& W = model.params.value(tcn_layer_id(i) + ".W");
        const Eigen::MatrixXd& b = model.params.value(tcn_layer_id(i) + ".b");
        const Eigen::MatrixXd& ring = state.rings[static_cast<std::size_t>(i)];
        const Eigen::Index in_ch = ring.cols();
        const int dilation = 1 << i;
        Eigen::VectorXd pre = b.col(0);
        for (int tap = 0; tap < model.spec.tcn_kernel; ++tap) {
          const Eigen::Index lag =
              static_cast<Eigen::Index>(model.spec.tcn_kernel - 1 - tap) *
              dilation;
          pre += W.middleCols(tap * in_ch, in_ch) *
                 ring.row(ring.rows() - 1 - lag).transpose();
        }
        const Eigen::RowVectorXd out = pre.array().tanh().matrix().transpose();
        push(state.rings[static_cast<std::size_t>(i) + 1], out);
      }
      break;
    }
    case BackboneKind::Lstm: {
      nn::lstm_step(model.params, "lstm", x_norm.transpose(), state.h,
                    state.c);
      break;
    }
  }
}

Eigen::VectorXd phi_from_state(const RegimeNetModel& model,
                               const SimState& state) {
  Eigen::RowVectorXd features;
  switch (model.spec.kind) {
    case BackboneKind::Ffn: {
      Eigen::MatrixXd flat(1, state.window.size());
      for (Eigen::Index d = 0; d < state.window.rows(); ++d) {
        flat.block(0, d * state.window.cols(), 1, state.window.cols()) =
            state.window.row(d);
      }
      Eigen::MatrixXd h = flat;
      for (std::size_t i = 0; i < model.spec.ffn_hidden.size(); ++i) {
        h = nn::dense_forward(model.params, ffn_layer_id(static_cast<int>(i)),
                              h, true);
      }
      features = h.row(0);
      break;
    }
    case BackboneKind::Tcn: {
      features = state.rings.back().row(state.rings.back().rows() - 1);
      break;
    }
    case BackboneKind::Lstm: {
      features = state.h.transpose();
      break;
    }
  }
  return nn::regime_head(model.params, "head", features).row(0).transpose();
}

Eigen::MatrixXd normalize_with(const RegimeNetModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& raw) {
  if (raw.cols() != model.norm.mean.size())
    throw NumericalError("history width does not match the trained model");
  return (raw.rowwise() - model.norm.mean.transpose()).array().rowwise() /
         model.norm.variance.transpose().array();
}

}  // namespace

std::string backbone_kind_name(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::Ffn:
      return "ff";
    case BackboneKind::Tcn:
      return "cnn";
    case BackboneKind::Lstm:
      return "lstm";
  }
  return "?";
}

int BackboneSpec::receptive_field() const {
  switch (kind) {
    case BackboneKind::Ffn:
      return ffn_days;
    case BackboneKind::Tcn:
      return 1 + (tcn_kernel - 1) * ((1 << tcn_layers) - 1);
    case BackboneKind::Lstm:
      return 1;
  }
  return 1;
}

std::pair<Eigen::MatrixXd, NormConstants> normalize_inputs(
    const Eigen::Ref<const Eigen::MatrixXd>& window) {
  if (window.rows() < 2)
    throw InsufficientDataError("normalization needs at least 2 rows");
  NormConstants norm;
  norm.mean = window.colwise().mean();
  const Eigen::MatrixXd centered = window.rowwise() - norm.mean.transpose();
  norm.variance = centered.array().square().colwise().sum().transpose() /
                  static_cast<double>(window.rows() - 1);
  if (!(norm.variance.array() > 0.0).all())
    throw NumericalError("zero variance column cannot be normalized");
  Eigen::MatrixXd normalized =
      centered.array().rowwise() / norm.variance.transpose().array();
  return {std::move(normalized), std::move(norm)};
}

RegimeNetModel make_regime_net(const BackboneSpec& spec, int k, int n_assets,
                               int lookahead) {
  if (k < 2) throw ConfigError("regime networks need k >= 2");
  if (n_assets < 1) throw ConfigError("need at least one asset");
  RegimeNetModel model;
  model.spec = spec;
  model.k = k;
  model.lookahead = lookahead;
  model.gmm = nn::GmmHead(k, n_assets);

  switch (spec.kind) {
    case BackboneKind::Ffn: {
      int in_dim = spec.ffn_days * n_assets;
      for (std::size_t i = 0; i < spec.ffn_hidden.size(); ++i) {
        nn::register_dense(model.params, ffn_layer_id(static_cast<int>(i)),
                           in_dim, spec.ffn_hidden[i]);
        in_dim = spec.ffn_hidden[i];
      }
      break;
    }
    case BackboneKind::Tcn: {
      int in_ch = n_assets;
      for (int i = 0; i < spec.tcn_layers; ++i) {
        nn::register_causal_conv(model.params, tcn_layer_id(i), in_ch,
                                 spec.tcn_channels, spec.tcn_kernel);
        in_ch = spec.tcn_channels;
      }
      break;
    }
    case BackboneKind::Lstm: {
      nn::register_lstm(model.params, "lstm", n_assets, spec.lstm_hidden);
      break;
    }
  }
  nn::register_dense(model.params, "head", feature_dim(spec), k);
  model.gmm.register_params(model.params);
  return model;
}

void random_initialize(RegimeNetModel& model, Rng& rng) {
  initialize_backbone(model, rng);
  // Naive GMM start at unit scale: means U(-1, 1), identity factor.
  for (int i = 0; i < model.k; ++i) {
    Eigen::MatrixXd& mean = model.params.value(model.gmm.mean_name(i));
    fill_uniform(mean, 1.0, rng);
    model.params.value(model.gmm.log_diag_name(i)).setZero();
    if (model.dim() > 1)
      model.params.value(model.gmm.off_diag_name(i)).setZero();
  }
}

void hmm_initialize(RegimeNetModel& model, const HmmParams& hmm, Rng& rng) {
  if (hmm.k() != model.k)
    throw NumericalError("HMM regime count does not match the model");
  if (hmm.dim() != model.dim())
    throw NumericalError("HMM dimension does not match the model");
  if (model.norm.mean.size() != model.dim())
    throw ConfigError("norm constants must be set before HMM initialization");

  initialize_backbone(model, rng);
  // Rescale (mu, L) into normalized input space: x' = (x - m) / v maps
  // N(mu, L L^T) to N((mu - m) / v, D L (D L)^T) with D = diag(1 / v).
  const Eigen::ArrayXd inv_var = model.norm.variance.array().inverse();
  for (int i = 0; i < model.k; ++i) {
    const MvGaussian& g = hmm.regimes[static_cast<std::size_t>(i)];
    const Eigen::VectorXd mean =
        ((g.mean() - model.norm.mean).array() * inv_var).matrix();
    const Eigen::MatrixXd factor = inv_var.matrix().asDiagonal() * g.factor();
    model.gmm.set_from(model.params, i, MvGaussian(mean, factor));
  }
}

NetForward net_forward(const RegimeNetModel& model,
                       const Eigen::Ref<const Eigen::MatrixXd>& normalized) {
  ForwardCtx ctx;
  forward_with_cache(model, normalized, ctx);
  return NetForward{std::move(ctx.phi), ctx.offset};
}

Eigen::VectorXd regime_probs(const RegimeNetModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& history) {
  const SimState state = prime_state(model, normalize_with(model, history));
  return phi_from_state(model, state);
}

NetForward in_sample_regime_probs(
    const RegimeNetModel& model,
    const Eigen::Ref<const Eigen::MatrixXd>& window) {
  return net_forward(model, normalize_with(model, window));
}

double training_loss_and_gradients(RegimeNetModel& model,
                                   const Eigen::Ref<const Eigen::MatrixXd>& normalized,
                                   double reg_weight) {
  ForwardCtx ctx;
  forward_with_cache(model, normalized, ctx);
  Eigen::MatrixXd d_phi;
  const nn::CompositeLossValue loss = nn::regularized_sequence_loss(
      model.params, model.gmm, ctx.phi, normalized, ctx.offset,
      model.lookahead, reg_weight, &d_phi);
  backward_from_phi(model, ctx, d_phi);
  return loss.total;
}

RegimeNetModel train_regime_net(const Eigen::Ref<const Eigen::MatrixXd>& window,
                                const BackboneSpec& spec,
                                const TrainConfig& config,
                                const HmmParams* hmm_init,
                                TrainReport* report) {
  if (window.rows() < config.window_days)
    throw InsufficientDataError("window shorter than configured training size");
  if (config.attempts < 1) throw ConfigError("attempts must be >= 1");
  if (config.window_days <= spec.receptive_field() + config.lookahead)
    throw ConfigError("training window must exceed receptive field + lookahead");

  const Eigen::MatrixXd tail = window.bottomRows(config.window_days);
  auto [normalized, norm] = normalize_inputs(tail);
  const int n = static_cast<int>(tail.cols());

  TrainReport local_report;
  RegimeNetModel best;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_index = -1;

  for (int attempt = 0; attempt < config.attempts; ++attempt) {
    RegimeNetModel model =
        make_regime_net(spec, config.k, n, config.lookahead);
    model.norm = norm;
    Rng init_rng(derive_seed(config.seed, kAttemptTag,
                             static_cast<std::uint64_t>(attempt)));
    if (hmm_init) {
      hmm_initialize(model, *hmm_init, init_rng);
    } else {
      random_initialize(model, init_rng);
    }

    TrainAttempt record;
    bool ok = true;
    try {
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        model.params.zero_grads();
        const double loss =
            training_loss_and_gradients(model, normalized, config.reg_weight);
        record.loss_curve.push_back(loss);
        if (!std::isfinite(loss)) {
          ok = false;
          break;
        }
        model.params.adamax_step(config.learning_rate, config.weight_decay);
      }
    } catch (const NumericalError&) {
      ok = false;
    }

    if (ok) {
      sort_model_regimes(model);
      try {
        ForwardCtx ctx;
        forward_with_cache(model, normalized, ctx);
        Eigen::MatrixXd scratch;
        const nn::CompositeLossValue final_loss = nn::regularized_sequence_loss(
            model.params, model.gmm, ctx.phi, normalized, ctx.offset,
            config.lookahead, config.reg_weight, &scratch);
        model.params.zero_grads();
        if (!std::isfinite(final_loss.total)) {
          ok = false;
        } else {
          record.loss_curve.push_back(final_loss.total);
          record.final_loss = final_loss.total;
          record.regime_shares = ctx.phi.colwise().mean().transpose();
        }
      } catch (const NumericalError&) {
        ok = false;
      }
    }
    record.aborted = !ok;
    if (ok && record.final_loss < best_loss) {
      best_loss = record.final_loss;
      best = model;
      best_index = attempt;
    }
    local_report.attempts.push_back(std::move(record));
  }

  if (best_index < 0)
    throw NumericalError("training failed: all attempts aborted");
  local_report.selected = best_index;
  if (report) *report = std::move(local_report);
  return best;
}

Eigen::MatrixXd simulate_path(const RegimeNetModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& history,
                              int horizon, Rng& rng) {
  const Eigen::MatrixXd normalized = normalize_with(model, history);
  SimState state = prime_state(model, normalized);

  std::vector<MvGaussian> regimes;
  regimes.reserve(static_cast<std::size_t>(model.k));
  for (int i = 0; i < model.k; ++i)
    regimes.push_back(model.gmm.gaussian(model.params, i));

  Eigen::MatrixXd path(horizon, model.dim());
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd phi = phi_from_state(model, state);
    const int regime = rng.categorical(phi);
    const Eigen::VectorXd draw =
        sample(regimes[static_cast<std::size_t>(regime)], rng);
    path.row(t) = (draw.array() * model.norm.variance.array() +
                   model.norm.mean.array())
                      .matrix()
                      .transpose();
    advance_state(model, state, draw.transpose());
  }
  return path;
}

Eigen::MatrixXd simulate_horizon_returns(
    const RegimeNetModel& model,
    const Eigen::Ref<const Eigen::MatrixXd>& history, int horizon, int paths,
    Rng& rng) {
  const Eigen::MatrixXd normalized = normalize_with(model, history);
  const SimState primed = prime_state(model, normalized);

  std::vector<MvGaussian> regimes;
  regimes.reserve(static_cast<std::size_t>(model.k));
  for (int i = 0; i < model.k; ++i)
    regimes.push_back(model.gmm.gaussian(model.params, i));

  Eigen::MatrixXd compounded(paths, model.dim());
  for (int p = 0; p < paths; ++p) {
    SimState state = primed;
    Eigen::ArrayXd growth = Eigen::ArrayXd::Ones(model.dim());
    for (int t = 0; t < horizon; ++t) {
      const Eigen::VectorXd phi = phi_from_state(model, state);
      const int regime = rng.categorical(phi);
      const Eigen::VectorXd draw =
          sample(regimes[static_cast<std::size_t>(regime)], rng);
      growth *= 1.0 + (draw.array() * model.norm.variance.array() +
                       model.norm.mean.array());
      advance_state(model, state, draw.transpose());
    }
    compounded.row(p) = (growth - 1.0).matrix().transpose();
  }
  return compounded;
}

}  // namespace regimevar
