#include "regimevar/nn/layers.hpp"

#include <cmath>

#include "regimevar/errors.hpp"

namespace regimevar::nn {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) {
  return 0.5 * (0.5 * z).tanh() + 0.5;
}

}  // namespace

void register_dense(ParamStore& store, const std::string& id, int in_dim,
                    int out_dim) {
  store.add(id + ".W", out_dim, in_dim);
  store.add(id + ".b", out_dim, 1);
}

Eigen::MatrixXd dense_forward(const ParamStore& store, const std::string& id,
                              const Eigen::Ref<const Eigen::MatrixXd>& x,
                              bool tanh_activation, DenseCache* cache) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  const Eigen::MatrixXd& b = store.value(id + ".b");
  if (x.cols() != W.cols())
    throw NumericalError("dense layer '" + id + "': input width " +
                         std::to_string(x.cols()) + " != " +
                         std::to_string(W.cols()));
  Eigen::MatrixXd out = x * W.transpose();
  out.rowwise() += b.col(0).transpose();
  if (tanh_activation) out = out.array().tanh();
  if (cache) {
    cache->input = x;
    cache->output = out;
  }
  return out;
}

Eigen::MatrixXd dense_backward(ParamStore& store, const std::string& id,
                               const DenseCache& cache,
                               const Eigen::Ref<const Eigen::MatrixXd>& d_out,
                               bool tanh_activation) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  Eigen::MatrixXd d_pre = d_out;
  if (tanh_activation) {
    d_pre.array() *= (1.0 - cache.output.array().square());
  }
  store.grad(id + ".W") += d_pre.transpose() * cache.input;
  store.grad(id + ".b").col(0) += d_pre.colwise().sum().transpose();
  return d_pre * W;
}

void register_causal_conv(ParamStore& store, const std::string& id, int in_ch,
                          int out_ch, int kernel) {
  store.add(id + ".W", out_ch, in_ch * kernel);
  store.add(id + ".b", out_ch, 1);
}

Eigen::MatrixXd causal_dilated_conv_forward(
    const ParamStore& store, const std::string& id,
    const Eigen::Ref<const Eigen::MatrixXd>& seq, int dilation,
    bool tanh_activation, ConvCache* cache) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  const Eigen::MatrixXd& b = store.value(id + ".b");
  const Eigen::Index T = seq.rows();
  const Eigen::Index in_ch = seq.cols();
  const Eigen::Index out_ch = W.rows();
  const int kernel = static_cast<int>(W.cols() / in_ch);

  Eigen::MatrixXd out(T, out_ch);
  out.rowwise() = b.col(0).transpose();
  for (int tap = 0; tap < kernel; ++tap) {
    // tap 0 is the oldest position; the last tap reads the current row.
    const Eigen::Index lag =
        static_cast<Eigen::Index>(kernel - 1 - tap) * dilation;
    const Eigen::MatrixXd W_tap = W.middleCols(tap * in_ch, in_ch);
    if (lag >= T) continue;
    out.bottomRows(T - lag) += seq.topRows(T - lag) * W_tap.transpose();
  }
  if (tanh_activation) out = out.array().tanh();
  if (cache) {
    cache->input = seq;
    cache->output = out;
    cache->dilation = dilation;
  }
  return out;
}

Eigen::MatrixXd causal_dilated_conv_backward(
    ParamStore& store, const std::string& id, const ConvCache& cache,
    const Eigen::Ref<const Eigen::MatrixXd>& d_out, bool tanh_activation) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  const Eigen::Index T = cache.input.rows();
  const Eigen::Index in_ch = cache.input.cols();
  const int kernel = static_cast<int>(W.cols() / in_ch);

  Eigen::MatrixXd d_pre = d_out;
  if (tanh_activation) {
    d_pre.array() *= (1.0 - cache.output.array().square());
  }
  store.grad(id + ".b").col(0) += d_pre.colwise().sum().transpose();

  Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(T, in_ch);
  Eigen::MatrixXd& gW = store.grad(id + ".W");
  for (int tap = 0; tap < kernel; ++tap) {
    const Eigen::Index lag =
        static_cast<Eigen::Index>(kernel - 1 - tap) * cache.dilation;
    if (lag >= T) continue;
    const auto d_rows = d_pre.bottomRows(T - lag);
    const auto x_rows = cache.input.topRows(T - lag);
    gW.middleCols(tap * in_ch, in_ch) += d_rows.transpose() * x_rows;
    d_in.topRows(T - lag) +=
        d_rows * W.middleCols(tap * in_ch, in_ch);
  }
  return d_in;
}

void register_lstm(ParamStore& store, const std::string& id, int in_dim,
                   int hidden) {
  store.add(id + ".W", 4 * hidden, in_dim);
  store.add(id + ".U", 4 * hidden, hidden);
  store.add(id + ".b", 4 * hidden, 1);
}

Eigen::MatrixXd lstm_forward(const ParamStore& store, const std::string& id,
                             const Eigen::Ref<const Eigen::MatrixXd>& seq,
                             const Eigen::VectorXd& h0,
                             const Eigen::VectorXd& c0, LstmCache* cache) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  const Eigen::MatrixXd& U = store.value(id + ".U");
  const Eigen::MatrixXd& b = store.value(id + ".b");
  const Eigen::Index T = seq.rows();
  const Eigen::Index h_dim = U.cols();
  if (h0.size() != h_dim || c0.size() != h_dim)
    throw NumericalError("LSTM state size mismatch");

  Eigen::MatrixXd H(T, h_dim);
  Eigen::MatrixXd gate_i(T, h_dim), gate_f(T, h_dim), gate_g(T, h_dim),
      gate_o(T, h_dim), cell(T, h_dim);

  Eigen::VectorXd h = h0;
  Eigen::VectorXd c = c0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd pre =
        W * seq.row(t).transpose() + U * h + b.col(0);
    const Eigen::ArrayXd i = sigmoid(pre.segment(0, h_dim).array());
    const Eigen::ArrayXd f = sigmoid(pre.segment(h_dim, h_dim).array());
    const Eigen::ArrayXd g = pre.segment(2 * h_dim, h_dim).array().tanh();
    const Eigen::ArrayXd o = sigmoid(pre.segment(3 * h_dim, h_dim).array());
    c = (f * c.array() + i * g).matrix();
    h = (o * c.array().tanh()).matrix();
    gate_i.row(t) = i.transpose();
    gate_f.row(t) = f.transpose();
    gate_g.row(t) = g.transpose();
    gate_o.row(t) = o.transpose();
    cell.row(t) = c.transpose();
    H.row(t) = h.transpose();
  }
  if (cache) {
    cache->x = seq;
    cache->gate_i = std::move(gate_i);
    cache->gate_f = std::move(gate_f);
    cache->gate_g = std::move(gate_g);
    cache->gate_o = std::move(gate_o);
    cache->c = std::move(cell);
    cache->h = H;
    cache->h0 = h0;
    cache->c0 = c0;
  }
  return H;
}

Eigen::MatrixXd lstm_backward(ParamStore& store, const std::string& id,
                              const LstmCache& cache,
                              const Eigen::Ref<const Eigen::MatrixXd>& d_h_out) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  const Eigen::MatrixXd& U = store.value(id + ".U");
  const Eigen::Index T = cache.x.rows();
  const Eigen::Index h_dim = U.cols();

  Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(T, cache.x.cols());
  Eigen::VectorXd d_h_next = Eigen::VectorXd::Zero(h_dim);
  Eigen::VectorXd d_c_next = Eigen::VectorXd::Zero(h_dim);
  Eigen::MatrixXd& gW = store.grad(id + ".W");
  Eigen::MatrixXd& gU = store.grad(id + ".U");
  Eigen::MatrixXd& gb = store.grad(id + ".b");

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Eigen::ArrayXd i = cache.gate_i.row(t).transpose().array();
    const Eigen::ArrayXd f = cache.gate_f.row(t).transpose().array();
    const Eigen::ArrayXd g = cache.gate_g.row(t).transpose().array();
    const Eigen::ArrayXd o = cache.gate_o.row(t).transpose().array();
    const Eigen::ArrayXd c = cache.c.row(t).transpose().array();
    const Eigen::ArrayXd c_prev =
        (t == 0 ? cache.c0 : Eigen::VectorXd(cache.c.row(t - 1).transpose()))
            .array();
    const Eigen::ArrayXd tanh_c = c.tanh();

    const Eigen::ArrayXd d_h =
        d_h_out.row(t).transpose().array() + d_h_next.array();
    const Eigen::ArrayXd d_o = d_h * tanh_c;
    const Eigen::ArrayXd d_c =
        d_h * o * (1.0 - tanh_c.square()) + d_c_next.array();
    const Eigen::ArrayXd d_i = d_c * g;
    const Eigen::ArrayXd d_g = d_c * i;
    const Eigen::ArrayXd d_f = d_c * c_prev;

    Eigen::VectorXd d_pre(4 * h_dim);
    d_pre.segment(0, h_dim) = (d_i * i * (1.0 - i)).matrix();
    d_pre.segment(h_dim, h_dim) = (d_f * f * (1.0 - f)).matrix();
    d_pre.segment(2 * h_dim, h_dim) = (d_g * (1.0 - g.square())).matrix();
    d_pre.segment(3 * h_dim, h_dim) = (d_o * o * (1.0 - o)).matrix();

    const Eigen::VectorXd h_prev =
        t == 0 ? cache.h0 : Eigen::VectorXd(cache.h.row(t - 1).transpose());
    gW += d_pre * cache.x.row(t);
    gU += d_pre * h_prev.transpose();
    gb.col(0) += d_pre;

    d_x.row(t) = (W.transpose() * d_pre).transpose();
    d_h_next = U.transpose() * d_pre;
    d_c_next = (d_c * f).matrix();
  }
  return d_x;
}

void lstm_step(const ParamStore& store, const std::string& id,
               const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& h,
               Eigen::VectorXd& c) {
  const Eigen::MatrixXd& W = store.value(id + ".W");
  const Eigen::MatrixXd& U = store.value(id + ".U");
  const Eigen::MatrixXd& b = store.value(id + ".b");
  const Eigen::Index h_dim = U.cols();
  const Eigen::VectorXd pre = W * x + U * h + b.col(0);
  const Eigen::ArrayXd i = sigmoid(pre.segment(0, h_dim).array());
  const Eigen::ArrayXd f = sigmoid(pre.segment(h_dim, h_dim).array());
  const Eigen::ArrayXd g = pre.segment(2 * h_dim, h_dim).array().tanh();
  const Eigen::ArrayXd o = sigmoid(pre.segment(3 * h_dim, h_dim).array());
  c = (f * c.array() + i * g).matrix();
  h = (o * c.array().tanh()).matrix();
}

Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double peak = logits.row(t).maxCoeff();
    const Eigen::ArrayXd shifted = (logits.row(t).array() - peak).exp();
    out.row(t) = (shifted / shifted.sum()).transpose();
  }
  return out;
}

Eigen::MatrixXd softmax_rows_backward(
    const Eigen::Ref<const Eigen::MatrixXd>& probs,
    const Eigen::Ref<const Eigen::MatrixXd>& d_probs) {
  Eigen::MatrixXd d_logits(probs.rows(), probs.cols());
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    const double inner = probs.row(t).dot(d_probs.row(t));
    d_logits.row(t) =
        (probs.row(t).array() * (d_probs.row(t).array() - inner)).matrix();
  }
  return d_logits;
}

Eigen::MatrixXd regime_head(const ParamStore& store, const std::string& id,
                            const Eigen::Ref<const Eigen::MatrixXd>& features,
                            DenseCache* cache) {
  return softmax_rows(dense_forward(store, id, features, false, cache));
}

}  // namespace regimevar::nn
