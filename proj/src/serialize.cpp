#include "regimevar/serialize.hpp"

#include <fstream>

#include "regimevar/errors.hpp"

namespace regimevar {

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()},
                        {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const nlohmann::json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[idx++].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json gaussian_to_json(const MvGaussian& g) {
  const Eigen::Index n = g.dim();
  nlohmann::json factor = nlohmann::json::array();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c <= r; ++c) factor.push_back(g.factor()(r, c));
  }
  return nlohmann::json{{"mean", vector_to_json(g.mean())},
                        {"factor", std::move(factor)}};
}

MvGaussian gaussian_from_json(const nlohmann::json& j) {
  const Eigen::VectorXd mean = vector_from_json(j.at("mean"));
  const Eigen::Index n = mean.size();
  const nlohmann::json& packed = j.at("factor");
  if (static_cast<Eigen::Index>(packed.size()) != n * (n + 1) / 2)
    throw DataError("factor payload does not match the mean dimension");
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(n, n);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c <= r; ++c) factor(r, c) = packed[idx++].get<double>();
  }
  return MvGaussian(mean, factor);
}

nlohmann::json hmm_to_json(const HmmParams& params) {
  nlohmann::json trans = nlohmann::json::array();
  for (int i = 0; i < params.k(); ++i) {
    for (int j = 0; j < params.k(); ++j) trans.push_back(params.trans(i, j));
  }
  nlohmann::json regimes = nlohmann::json::array();
  for (const MvGaussian& g : params.regimes) regimes.push_back(gaussian_to_json(g));
  return nlohmann::json{{"pi0", vector_to_json(params.pi0)},
                        {"trans", std::move(trans)},
                        {"regimes", std::move(regimes)}};
}

HmmParams hmm_from_json(const nlohmann::json& j) {
  HmmParams params;
  params.pi0 = vector_from_json(j.at("pi0"));
  const int k = static_cast<int>(params.pi0.size());
  const nlohmann::json& trans = j.at("trans");
  if (static_cast<int>(trans.size()) != k * k)
    throw DataError("transition payload size mismatch");
  params.trans.resize(k, k);
  std::size_t idx = 0;
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) params.trans(r, c) = trans[idx++].get<double>();
  }
  for (const nlohmann::json& g : j.at("regimes")) {
    params.regimes.push_back(gaussian_from_json(g));
  }
  params.validate();
  return params;
}

nlohmann::json param_store_to_json(const nn::ParamStore& store) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const std::string& name : store.names()) {
    tensors[name] = matrix_to_json(store.value(name));
  }
  return nlohmann::json{{"tensors", std::move(tensors)}};
}

void param_store_from_json(const nlohmann::json& j, nn::ParamStore& store) {
  for (const auto& [name, payload] : j.at("tensors").items()) {
    const Eigen::MatrixXd m = matrix_from_json(payload);
    if (!store.contains(name))
      throw DataError("snapshot tensor '" + name +
                      "' does not exist in the model");
    if (store.value(name).rows() != m.rows() ||
        store.value(name).cols() != m.cols())
      throw DataError("snapshot tensor '" + name + "' has the wrong shape");
    store.value(name) = m;
  }
}

namespace {

nlohmann::json spec_to_json(const BackboneSpec& spec) {
  return nlohmann::json{{"kind", backbone_kind_name(spec.kind)},
                        {"ffn_hidden", spec.ffn_hidden},
                        {"ffn_days", spec.ffn_days},
                        {"tcn_layers", spec.tcn_layers},
                        {"tcn_channels", spec.tcn_channels},
                        {"tcn_kernel", spec.tcn_kernel},
                        {"lstm_hidden", spec.lstm_hidden}};
}

BackboneSpec spec_from_json(const nlohmann::json& j) {
  BackboneSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ff") {
    spec.kind = BackboneKind::Ffn;
  } else if (kind == "cnn") {
    spec.kind = BackboneKind::Tcn;
  } else if (kind == "lstm") {
    spec.kind = BackboneKind::Lstm;
  } else {
    throw DataError("unknown backbone kind '" + kind + "'");
  }
  spec.ffn_hidden = j.at("ffn_hidden").get<std::vector<int>>();
  spec.ffn_days = j.at("ffn_days").get<int>();
  spec.tcn_layers = j.at("tcn_layers").get<int>();
  spec.tcn_channels = j.at("tcn_channels").get<int>();
  spec.tcn_kernel = j.at("tcn_kernel").get<int>();
  spec.lstm_hidden = j.at("lstm_hidden").get<int>();
  return spec;
}

nlohmann::json net_to_json(const RegimeNetModel& model) {
  return nlohmann::json{
      {"spec", spec_to_json(model.spec)},
      {"k", model.k},
      {"lookahead", model.lookahead},
      {"params", param_store_to_json(model.params)},
      {"norm_mean", vector_to_json(model.norm.mean)},
      {"norm_variance", vector_to_json(model.norm.variance)},
      {"asset_names", model.asset_names}};
}

RegimeNetModel net_from_json(const nlohmann::json& j) {
  const BackboneSpec spec = spec_from_json(j.at("spec"));
  const int k = j.at("k").get<int>();
  const int lookahead = j.at("lookahead").get<int>();
  const Eigen::VectorXd mean = vector_from_json(j.at("norm_mean"));
  RegimeNetModel model =
      make_regime_net(spec, k, static_cast<int>(mean.size()), lookahead);
  model.norm.mean = mean;
  model.norm.variance = vector_from_json(j.at("norm_variance"));
  model.asset_names = j.at("asset_names").get<std::vector<std::string>>();
  param_store_from_json(j.at("params"), model.params);
  return model;
}

nlohmann::json report_to_json(const TrainReport& report) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const TrainAttempt& attempt : report.attempts) {
    attempts.push_back(
        nlohmann::json{{"loss_curve", attempt.loss_curve},
                       {"final_loss", attempt.final_loss},
                       {"aborted", attempt.aborted},
                       {"regime_shares", vector_to_json(attempt.regime_shares)}});
  }
  return nlohmann::json{{"attempts", std::move(attempts)},
                        {"selected", report.selected}};
}

TrainReport report_from_json(const nlohmann::json& j) {
  TrainReport report;
  report.selected = j.at("selected").get<int>();
  for (const nlohmann::json& item : j.at("attempts")) {
    TrainAttempt attempt;
    attempt.loss_curve = item.at("loss_curve").get<std::vector<double>>();
    attempt.final_loss = item.at("final_loss").get<double>();
    attempt.aborted = item.at("aborted").get<bool>();
    attempt.regime_shares = vector_from_json(item.at("regime_shares"));
    report.attempts.push_back(std::move(attempt));
  }
  return report;
}

}  // namespace

nlohmann::json bundle_to_json(const ModelBundle& bundle) {
  nlohmann::json j{{"format", "regimevar-model"},
                   {"version", ModelBundle::kVersion},
                   {"name", bundle.name},
                   {"kind", model_kind_name(bundle.kind)},
                   {"asset_names", bundle.asset_names}};
  if (bundle.classic) j["classic"] = gaussian_to_json(*bundle.classic);
  if (bundle.hmm) {
    j["hmm"] = hmm_to_json(*bundle.hmm);
    j["hmm_start"] = vector_to_json(bundle.hmm_start);
  }
  if (bundle.net) j["net"] = net_to_json(*bundle.net);
  if (bundle.report) j["training_report"] = report_to_json(*bundle.report);
  if (bundle.history_tail.size() > 0)
    j["history_tail"] = matrix_to_json(bundle.history_tail);
  return j;
}

ModelBundle bundle_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "regimevar-model")
    throw DataError("not a regimevar model bundle");
  if (j.value("version", -1) != ModelBundle::kVersion)
    throw DataError("unsupported model bundle version");
  ModelBundle bundle;
  bundle.name = j.value("name", "");
  bundle.kind = parse_model_kind(j.at("kind").get<std::string>());
  bundle.asset_names = j.value("asset_names", std::vector<std::string>{});
  if (j.contains("classic")) bundle.classic = gaussian_from_json(j["classic"]);
  if (j.contains("hmm")) {
    bundle.hmm = hmm_from_json(j["hmm"]);
    bundle.hmm_start = vector_from_json(j.at("hmm_start"));
  }
  if (j.contains("net")) bundle.net = net_from_json(j["net"]);
  if (j.contains("training_report"))
    bundle.report = report_from_json(j["training_report"]);
  if (j.contains("history_tail"))
    bundle.history_tail = matrix_from_json(j["history_tail"]);
  return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model bundle '" + path + "'");
  out << bundle_to_json(bundle).dump(2) << "\n";
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model bundle '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model bundle '" + path + "': " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace regimevar
