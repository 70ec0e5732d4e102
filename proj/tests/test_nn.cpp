#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "regimevar/errors.hpp"
#include "regimevar/nn/layers.hpp"
#include "regimevar/nn/mixture_loss.hpp"
#include "regimevar/nn/param_store.hpp"

using namespace regimevar;
using namespace regimevar::nn;

namespace {

void randomize(ParamStore& store, std::uint64_t seed, double scale = 0.6) {
  Rng rng(seed);
  for (const std::string& name : store.names()) {
    Eigen::MatrixXd& value = store.value(name);
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        value(r, c) = rng.uniform(-scale, scale);
      }
    }
  }
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
  }
  return m;
}

}  // namespace

TEST_CASE("adamax update") {
  SUBCASE("first unit-gradient step moves by exactly the learning rate") {
    ParamStore store;
    store.add("w", 1, 1);
    store.value("w")(0, 0) = 0.7;
    store.grad("w")(0, 0) = 1.0;
    store.adamax_step(0.01, 0.0);
    CHECK(store.value("w")(0, 0) == doctest::Approx(0.69).epsilon(1e-15));
  }
  SUBCASE("zero gradients leave parameters unchanged") {
    ParamStore store;
    store.add("w", 2, 2);
    store.value("w").setConstant(0.5);
    store.adamax_step(0.05, 0.0);
    CHECK((store.value("w").array() == 0.5).all());
  }
  SUBCASE("weight decay alone shrinks multiplicatively") {
    ParamStore store;
    store.add("w", 1, 1);
    store.value("w")(0, 0) = 2.0;
    store.adamax_step(0.1, 0.01);
    CHECK(store.value("w")(0, 0) ==
          doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
  }
  SUBCASE("non-finite gradient aborts") {
    ParamStore store;
    store.add("w", 1, 1);
    store.grad("w")(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(store.adamax_step(0.01, 0.0), NumericalError);
  }
}

TEST_CASE("dense layer forward") {
  ParamStore store;
  register_dense(store, "fc", 3, 3);
  SUBCASE("identity weights pass tanh(x) through") {
    store.value("fc.W").setIdentity();
    Eigen::MatrixXd x = random_matrix(4, 3, 9);
    const Eigen::MatrixXd y = dense_forward(store, "fc", x, true);
    CHECK((y - x.array().tanh().matrix()).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("zero weights give tanh(bias)") {
    store.value("fc.b").setConstant(0.3);
    const Eigen::MatrixXd y =
        dense_forward(store, "fc", Eigen::MatrixXd::Random(5, 3), true);
    CHECK((y.array() - std::tanh(0.3)).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("shape mismatch throws") {
    CHECK_THROWS_AS(
        dense_forward(store, "fc", Eigen::MatrixXd::Zero(2, 4), true),
        NumericalError);
  }
}

TEST_CASE("dense layer gradients match finite differences") {
  ParamStore store;
  register_dense(store, "fc", 4, 3);
  randomize(store, 21);
  const Eigen::MatrixXd x = random_matrix(6, 4, 22);
  const Eigen::MatrixXd target = random_matrix(6, 3, 23);

  auto loss = [&]() {
    const Eigen::MatrixXd y = dense_forward(store, "fc", x, true);
    return 0.5 * (y - target).squaredNorm();
  };
  store.zero_grads();
  DenseCache cache;
  const Eigen::MatrixXd y = dense_forward(store, "fc", x, true, &cache);
  dense_backward(store, "fc", cache, y - target, true);

  const auto check =
      testutil::finite_difference_check(store, testutil::snapshot_grads(store),
                                        loss);
  CHECK(check.max_rel_error < 1e-5);
}

TEST_CASE("causal dilated convolution") {
  ParamStore store;
  register_causal_conv(store, "conv", 2, 2, 3);
  SUBCASE("identity tap reproduces the input") {
    Eigen::MatrixXd& W = store.value("conv.W");
    W.setZero();
    W.block(0, 4, 2, 2).setIdentity();  // newest tap
    const Eigen::MatrixXd x = random_matrix(9, 2, 31);
    for (int dilation : {1, 2, 4}) {
      const Eigen::MatrixXd y =
          causal_dilated_conv_forward(store, "conv", x, dilation, false);
      CHECK((y - x).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
  SUBCASE("impulse response is causal") {
    randomize(store, 33);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(12, 2);
    const Eigen::MatrixXd base =
        causal_dilated_conv_forward(store, "conv", x, 2, true);
    x(5, 0) = 1.0;
    const Eigen::MatrixXd bumped =
        causal_dilated_conv_forward(store, "conv", x, 2, true);
    for (Eigen::Index t = 0; t < 5; ++t) {
      CHECK((bumped.row(t) - base.row(t)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((bumped.row(5) - base.row(5)).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("gradients match finite differences") {
    randomize(store, 35);
    const Eigen::MatrixXd x = random_matrix(10, 2, 36);
    const Eigen::MatrixXd target = random_matrix(10, 2, 37);
    auto loss = [&]() {
      const Eigen::MatrixXd y =
          causal_dilated_conv_forward(store, "conv", x, 2, true);
      return 0.5 * (y - target).squaredNorm();
    };
    store.zero_grads();
    ConvCache cache;
    const Eigen::MatrixXd y =
        causal_dilated_conv_forward(store, "conv", x, 2, true, &cache);
    causal_dilated_conv_backward(store, "conv", cache, y - target, true);
    const auto check = testutil::finite_difference_check(
        store, testutil::snapshot_grads(store), loss);
    CHECK(check.max_rel_error < 1e-5);
  }
}

TEST_CASE("stacked dilated convolutions reach a 255-day receptive field") {
  const int layers = 7;
  ParamStore store;
  register_causal_conv(store, "l0", 1, 1, 3);
  for (int i = 1; i < layers; ++i) {
    register_causal_conv(store, "l" + std::to_string(i), 1, 1, 3);
  }
  randomize(store, 41, 0.4);

  const int T = 300;
  auto run = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd h = x;
    for (int i = 0; i < layers; ++i) {
      h = causal_dilated_conv_forward(store, "l" + std::to_string(i), h,
                                      1 << i, true);
    }
    return h;
  };
  const Eigen::MatrixXd base = run(Eigen::MatrixXd::Zero(T, 1));
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(T, 1);
  const int t0 = 10;
  x(t0, 0) = 1.0;
  const Eigen::MatrixXd bumped = run(x);

  int last_affected = -1;
  int first_affected = T;
  for (int t = 0; t < T; ++t) {
    if (std::fabs(bumped(t, 0) - base(t, 0)) > 0.0) {
      last_affected = t;
      first_affected = std::min(first_affected, t);
    }
  }
  CHECK(first_affected == t0);
  CHECK(last_affected == t0 + 254);  // receptive field of 255 days
}

TEST_CASE("lstm cell") {
  ParamStore store;
  register_lstm(store, "cell", 2, 3);
  SUBCASE("zero weights give zero state") {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
    lstm_step(store, "cell", Eigen::VectorXd::Constant(2, 0.7), h, c);
    CHECK(h.cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single-step gradients match finite differences") {
    randomize(store, 51);
    const Eigen::MatrixXd x = random_matrix(1, 2, 52);
    const Eigen::MatrixXd target = random_matrix(1, 3, 53);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    auto loss = [&]() {
      const Eigen::MatrixXd h = lstm_forward(store, "cell", x, zero, zero);
      return 0.5 * (h - target).squaredNorm();
    };
    store.zero_grads();
    LstmCache cache;
    const Eigen::MatrixXd h = lstm_forward(store, "cell", x, zero, zero, &cache);
    lstm_backward(store, "cell", cache, h - target);
    const auto check = testutil::finite_difference_check(
        store, testutil::snapshot_grads(store), loss);
    CHECK(check.max_rel_error < 1e-5);
  }
  SUBCASE("50-step unrolled gradients match finite differences") {
    randomize(store, 55);
    const Eigen::MatrixXd x = random_matrix(50, 2, 56);
    const Eigen::MatrixXd target = random_matrix(50, 3, 57);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    auto loss = [&]() {
      const Eigen::MatrixXd h = lstm_forward(store, "cell", x, zero, zero);
      return 0.5 * (h - target).squaredNorm();
    };
    store.zero_grads();
    LstmCache cache;
    const Eigen::MatrixXd h = lstm_forward(store, "cell", x, zero, zero, &cache);
    lstm_backward(store, "cell", cache, h - target);
    const auto check = testutil::finite_difference_check(
        store, testutil::snapshot_grads(store), loss);
    CHECK(check.max_rel_error < 1e-4);
  }
  SUBCASE("batch forward equals repeated single steps") {
    randomize(store, 58);
    const Eigen::MatrixXd x = random_matrix(7, 2, 59);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    const Eigen::MatrixXd H = lstm_forward(store, "cell", x, zero, zero);
    Eigen::VectorXd h = zero, c = zero;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      lstm_step(store, "cell", x.row(t).transpose(), h, c);
      CHECK((H.row(t).transpose() - h).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("softmax head") {
  SUBCASE("zero logits are uniform") {
    const Eigen::MatrixXd probs = softmax_rows(Eigen::MatrixXd::Zero(3, 4));
    CHECK((probs.array() - 0.25).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("extreme logits do not overflow") {
    Eigen::MatrixXd logits(1, 2);
    logits << 100.0, -100.0;
    const Eigen::MatrixXd probs = softmax_rows(logits);
    CHECK(probs(0, 0) == doctest::Approx(1.0));
    CHECK(probs(0, 1) == doctest::Approx(0.0));
    CHECK(std::isfinite(probs(0, 0)));
  }
  SUBCASE("rows sum to one and shift invariance holds") {
    const Eigen::MatrixXd logits = random_matrix(5, 3, 61, 4.0);
    const Eigen::MatrixXd probs = softmax_rows(logits);
    for (Eigen::Index t = 0; t < probs.rows(); ++t) {
      CHECK(std::fabs(probs.row(t).sum() - 1.0) < 1e-12);
      CHECK((probs.row(t).array() > 0.0).all());
    }
    const Eigen::MatrixXd shifted = softmax_rows(
        (logits.array() + 7.5).matrix());
    CHECK((shifted - probs).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("gradient through the softmax composite") {
    ParamStore store;
    register_dense(store, "head", 3, 2);
    randomize(store, 63);
    const Eigen::MatrixXd features = random_matrix(4, 3, 64);
    const Eigen::MatrixXd target = random_matrix(4, 2, 65, 0.4);
    auto loss = [&]() {
      const Eigen::MatrixXd probs = regime_head(store, "head", features);
      return 0.5 * (probs - target).squaredNorm();
    };
    store.zero_grads();
    DenseCache cache;
    const Eigen::MatrixXd probs = regime_head(store, "head", features, &cache);
    const Eigen::MatrixXd d_logits =
        softmax_rows_backward(probs, probs - target);
    dense_backward(store, "head", cache, d_logits, false);
    const auto check = testutil::finite_difference_check(
        store, testutil::snapshot_grads(store), loss);
    CHECK(check.max_rel_error < 1e-5);
  }
}

TEST_CASE("gmm head keeps covariances positive definite") {
  GmmHead head(2, 3);
  ParamStore store;
  head.register_params(store);
  randomize(store, 71, 3.0);  // includes large negative log-diagonals
  for (int i = 0; i < 2; ++i) {
    const MvGaussian g = head.gaussian(store, i);
    const Eigen::MatrixXd cov = g.covariance();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("gmm head set/get roundtrip") {
  GmmHead head(2, 2);
  ParamStore store;
  head.register_params(store);
  Eigen::MatrixXd factor(2, 2);
  factor << 0.8, 0.0, -0.3, 1.2;
  const MvGaussian g(Eigen::VectorXd::Constant(2, 0.1), factor);
  head.set_from(store, 1, g);
  const MvGaussian back = head.gaussian(store, 1);
  CHECK((back.mean() - g.mean()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((back.factor() - g.factor()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sequence loss values") {
  SUBCASE("k=1, J=1 is the plain negative log-likelihood") {
    GmmHead head(1, 1);
    ParamStore store;
    head.register_params(store);
    store.value(head.mean_name(0))(0, 0) = 0.2;
    store.value(head.log_diag_name(0))(0, 0) = std::log(0.7);
    const MvGaussian g = head.gaussian(store, 0);

    const Eigen::MatrixXd obs = random_matrix(8, 1, 81);
    const Eigen::MatrixXd phi = Eigen::MatrixXd::Ones(8, 1);
    const auto value = sequence_loss(store, head, phi, obs, 0, 1, nullptr);
    double expected = 0.0;
    for (Eigen::Index t = 0; t + 1 < obs.rows(); ++t) {
      expected -= log_density(g, obs.row(t + 1).transpose());
    }
    CHECK(value.loss == doctest::Approx(expected).epsilon(1e-12));
    CHECK(value.terms == 7);
  }
  SUBCASE("one-hot phi collapses to the selected regime") {
    GmmHead head(2, 1);
    ParamStore store;
    head.register_params(store);
    randomize(store, 83);
    const MvGaussian g0 = head.gaussian(store, 0);

    const Eigen::MatrixXd obs = random_matrix(10, 1, 84);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(10, 2);
    phi.col(0).setOnes();
    const auto value = sequence_loss(store, head, phi, obs, 0, 3, nullptr);
    double expected = 0.0;
    for (Eigen::Index t = 0; t < obs.rows(); ++t) {
      for (int j = 1; j <= 3; ++j) {
        if (t + j >= obs.rows()) break;
        expected -= log_density(g0, obs.row(t + j).transpose());
      }
    }
    CHECK(value.loss == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("matches a direct-summation oracle and finite differences") {
    GmmHead head(2, 2);
    ParamStore store;
    head.register_params(store);
    randomize(store, 85);
    const Eigen::MatrixXd obs = random_matrix(9, 2, 86);
    const Eigen::MatrixXd phi =
        softmax_rows(random_matrix(7, 2, 87, 1.5));  // offset 2
    const Eigen::Index offset = 2;
    const int lookahead = 3;

    // direct mixture summation with explicit densities
    double expected = 0.0;
    for (Eigen::Index p = 0; p < phi.rows(); ++p) {
      for (int j = 1; j <= lookahead; ++j) {
        const Eigen::Index s = offset + p + j;
        if (s >= obs.rows()) break;
        double mix = 0.0;
        for (int i = 0; i < 2; ++i) {
          mix += phi(p, i) * std::exp(log_density(head.gaussian(store, i),
                                                  obs.row(s).transpose()));
        }
        expected -= std::log(mix);
      }
    }
    store.zero_grads();
    Eigen::MatrixXd d_phi;
    const auto value =
        sequence_loss(store, head, phi, obs, offset, lookahead, &d_phi);
    CHECK(value.loss == doctest::Approx(expected).epsilon(1e-10));

    // finite differences over the GMM parameters
    auto loss = [&]() {
      ParamStore& s = store;
      Eigen::MatrixXd scratch;
      // recompute without touching gradients: value only
      GmmHead h2 = head;
      double out = 0.0;
      for (Eigen::Index p = 0; p < phi.rows(); ++p) {
        for (int j = 1; j <= lookahead; ++j) {
          const Eigen::Index t = offset + p + j;
          if (t >= obs.rows()) break;
          double mix = 0.0;
          for (int i = 0; i < 2; ++i) {
            mix += phi(p, i) * std::exp(log_density(h2.gaussian(s, i),
                                                    obs.row(t).transpose()));
          }
          out -= std::log(mix);
        }
      }
      return out;
    };
    const auto check = testutil::finite_difference_check(
        store, testutil::snapshot_grads(store), loss);
    CHECK(check.max_rel_error < 1e-5);

    // finite differences over phi
    for (Eigen::Index p = 0; p < phi.rows(); ++p) {
      for (int i = 0; i < 2; ++i) {
        Eigen::MatrixXd bumped = phi;
        const double eps = 1e-6;
        bumped(p, i) += eps;
        const auto up =
            sequence_loss(store, head, bumped, obs, offset, lookahead, nullptr);
        bumped(p, i) -= 2.0 * eps;
        const auto down =
            sequence_loss(store, head, bumped, obs, offset, lookahead, nullptr);
        const double numeric = (up.loss - down.loss) / (2.0 * eps);
        CHECK(std::fabs(numeric - d_phi(p, i)) /
                  std::max({1.0, std::fabs(numeric), std::fabs(d_phi(p, i))}) <
              1e-5);
      }
    }
  }
}

TEST_CASE("balance regularizer") {
  SUBCASE("balance fixed points") {
    Eigen::MatrixXd balanced(4, 2);
    balanced << 0.6, 0.4, 0.4, 0.6, 0.5, 0.5, 0.5, 0.5;
    CHECK(balance_regularizer(balanced) == doctest::Approx(0.5));

    Eigen::MatrixXd collapsed(3, 2);
    collapsed << 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;
    CHECK(balance_regularizer(collapsed) == doctest::Approx(1.0));

    Eigen::MatrixXd uniform4 = Eigen::MatrixXd::Constant(5, 4, 0.25);
    CHECK(balance_regularizer(uniform4) == doctest::Approx(0.25));
  }
  SUBCASE("range is [1/k, 1] for row-stochastic phi") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const Eigen::MatrixXd phi =
          softmax_rows(random_matrix(20, 3, seed, 5.0));
      const double reg = balance_regularizer(phi);
      CHECK(reg >= 1.0 / 3.0 - 1e-12);
      CHECK(reg <= 1.0 + 1e-12);
    }
  }
  SUBCASE("gradient matches finite differences") {
    const Eigen::MatrixXd phi = softmax_rows(random_matrix(6, 2, 91));
    const Eigen::MatrixXd grad = balance_regularizer_grad(phi);
    const double eps = 1e-7;
    for (Eigen::Index t = 0; t < phi.rows(); ++t) {
      for (int i = 0; i < 2; ++i) {
        Eigen::MatrixXd bumped = phi;
        bumped(t, i) += eps;
        const double up = balance_regularizer(bumped);
        bumped(t, i) -= 2.0 * eps;
        const double down = balance_regularizer(bumped);
        CHECK(std::fabs((up - down) / (2.0 * eps) - grad(t, i)) < 1e-6);
      }
    }
  }
}

TEST_CASE("regularized loss scaling") {
  CHECK(regularized_loss(3.0, 1.0, 1.0) == doctest::Approx(6.0));
  CHECK(regularized_loss(3.0, 0.5, 1.0) == doctest::Approx(4.5));
  CHECK(regularized_loss(3.0, 0.8, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("composite regularized sequence loss gradient") {
  GmmHead head(2, 1);
  ParamStore store;
  head.register_params(store);
  randomize(store, 95);
  const Eigen::MatrixXd obs = random_matrix(10, 1, 96);
  const Eigen::MatrixXd phi = softmax_rows(random_matrix(10, 2, 97, 1.2));
  const double w = 1.0;

  store.zero_grads();
  Eigen::MatrixXd d_phi;
  const auto composite =
      regularized_sequence_loss(store, head, phi, obs, 0, 5, w, &d_phi);
  CHECK(composite.total ==
        doctest::Approx((1.0 + w * composite.reg) * composite.base));

  auto total_loss = [&](const Eigen::MatrixXd& p) {
    double base = 0.0;
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
      for (int j = 1; j <= 5; ++j) {
        if (t + j >= obs.rows()) break;
        double mix = 0.0;
        for (int i = 0; i < 2; ++i) {
          mix += p(t, i) * std::exp(log_density(head.gaussian(store, i),
                                                obs.row(t + j).transpose()));
        }
        base -= std::log(mix);
      }
    }
    return (1.0 + w * balance_regularizer(p)) * base;
  };

  // GMM parameter gradients under the composite factor
  auto param_loss = [&]() { return total_loss(phi); };
  const auto check = testutil::finite_difference_check(
      store, testutil::snapshot_grads(store), param_loss);
  CHECK(check.max_rel_error < 1e-5);

  // phi gradients including the regularizer product rule
  const double eps = 1e-6;
  for (Eigen::Index t = 0; t < phi.rows(); ++t) {
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXd bumped = phi;
      bumped(t, i) += eps;
      const double up = total_loss(bumped);
      bumped(t, i) -= 2.0 * eps;
      const double down = total_loss(bumped);
      const double numeric = (up - down) / (2.0 * eps);
      CHECK(std::fabs(numeric - d_phi(t, i)) /
                std::max({1.0, std::fabs(numeric), std::fabs(d_phi(t, i))}) <
            1e-5);
    }
  }
}
