#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "regimevar/backtest.hpp"
#include "regimevar/gaussian.hpp"
#include "regimevar/hmm.hpp"
#include "regimevar/regime_net.hpp"

namespace regimevar {

// JSON persistence. Gaussians are stored as a mean array plus the packed
// row-major lower triangle of the covariance factor.

nlohmann::json gaussian_to_json(const MvGaussian& g);
MvGaussian gaussian_from_json(const nlohmann::json& j);

nlohmann::json hmm_to_json(const HmmParams& params);
HmmParams hmm_from_json(const nlohmann::json& j);

nlohmann::json param_store_to_json(const nn::ParamStore& store);
void param_store_from_json(const nlohmann::json& j, nn::ParamStore& store);

/// A persisted, simulation-ready model: a classic Gaussian, an HMM with
/// its smoothed start distribution, or a trained regime network with the
/// raw history tail that seeds its rolling receptive field.
struct ModelBundle {
  static constexpr int kVersion = 1;

  std::string name;
  ModelKind kind = ModelKind::Classic;
  std::optional<MvGaussian> classic;
  std::optional<HmmParams> hmm;
  Eigen::VectorXd hmm_start;         // smoothed regime distribution
  std::optional<RegimeNetModel> net;
  std::optional<TrainReport> report;
  Eigen::MatrixXd history_tail;      // raw returns, newest row last
  std::vector<std::string> asset_names;
};

nlohmann::json bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& j);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace regimevar
