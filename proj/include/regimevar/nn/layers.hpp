#pragma once

#include <Eigen/Dense>
#include <string>

#include "regimevar/nn/param_store.hpp"

namespace regimevar::nn {

// Layer parameters live in a ParamStore under "<id>.W" / "<id>.b"
// ("<id>.U" for the LSTM recurrence). All batch matrices are row-per-time.

void register_dense(ParamStore& store, const std::string& id, int in_dim,
                    int out_dim);

struct DenseCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd output;  // post-activation
};

/// x [T x in] -> W x + b, optionally through tanh.
Eigen::MatrixXd dense_forward(const ParamStore& store, const std::string& id,
                              const Eigen::Ref<const Eigen::MatrixXd>& x,
                              bool tanh_activation,
                              DenseCache* cache = nullptr);

/// Accumulates parameter gradients, returns d(loss)/d(input).
Eigen::MatrixXd dense_backward(ParamStore& store, const std::string& id,
                               const DenseCache& cache,
                               const Eigen::Ref<const Eigen::MatrixXd>& d_out,
                               bool tanh_activation);

void register_causal_conv(ParamStore& store, const std::string& id, int in_ch,
                          int out_ch, int kernel);

struct ConvCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd output;
  int dilation = 1;
};

/// Causal dilated convolution: output[t] depends only on inputs at
/// {t, t - d, ..., t - (kernel-1) d}; positions before the window start
/// are zero-padded. Kernel columns are tap-major, oldest tap first.
Eigen::MatrixXd causal_dilated_conv_forward(
    const ParamStore& store, const std::string& id,
    const Eigen::Ref<const Eigen::MatrixXd>& seq, int dilation,
    bool tanh_activation, ConvCache* cache = nullptr);

Eigen::MatrixXd causal_dilated_conv_backward(
    ParamStore& store, const std::string& id, const ConvCache& cache,
    const Eigen::Ref<const Eigen::MatrixXd>& d_out, bool tanh_activation);

void register_lstm(ParamStore& store, const std::string& id, int in_dim,
                   int hidden);

struct LstmCache {
  Eigen::MatrixXd x;
  Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;  // [T x h] each
  Eigen::MatrixXd c, h;
  Eigen::VectorXd h0, c0;
};

/// Standard LSTM cell (sigmoid input/forget/output gates, tanh candidate)
/// unrolled over the sequence; returns the hidden states [T x h].
Eigen::MatrixXd lstm_forward(const ParamStore& store, const std::string& id,
                             const Eigen::Ref<const Eigen::MatrixXd>& seq,
                             const Eigen::VectorXd& h0,
                             const Eigen::VectorXd& c0,
                             LstmCache* cache = nullptr);

/// Exact backpropagation through time; returns d(loss)/d(inputs).
Eigen::MatrixXd lstm_backward(ParamStore& store, const std::string& id,
                              const LstmCache& cache,
                              const Eigen::Ref<const Eigen::MatrixXd>& d_h);

/// Single recurrent step for simulation; updates h and c in place.
void lstm_step(const ParamStore& store, const std::string& id,
               const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& h,
               Eigen::VectorXd& c);

/// Row-wise softmax with max-subtraction; outputs strictly positive and
/// sum to 1.
Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits);

Eigen::MatrixXd softmax_rows_backward(
    const Eigen::Ref<const Eigen::MatrixXd>& probs,
    const Eigen::Ref<const Eigen::MatrixXd>& d_probs);

/// Affine map over features then softmax into regime probabilities.
Eigen::MatrixXd regime_head(const ParamStore& store, const std::string& id,
                            const Eigen::Ref<const Eigen::MatrixXd>& features,
                            DenseCache* cache = nullptr);

}  // namespace regimevar::nn
