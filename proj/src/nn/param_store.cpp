#include "regimevar/nn/param_store.hpp"

#include "regimevar/errors.hpp"

namespace regimevar::nn {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
}  // namespace

Eigen::MatrixXd& ParamStore::add(const std::string& name, Eigen::Index rows,
                                 Eigen::Index cols) {
  if (slots_.count(name))
    throw ConfigError("parameter '" + name + "' registered twice");
  Slot slot;
  slot.value = Eigen::MatrixXd::Zero(rows, cols);
  slot.grad = Eigen::MatrixXd::Zero(rows, cols);
  slot.moment = Eigen::MatrixXd::Zero(rows, cols);
  slot.inf_norm = Eigen::MatrixXd::Zero(rows, cols);
  return slots_.emplace(name, std::move(slot)).first->second.value;
}

bool ParamStore::contains(const std::string& name) const {
  return slots_.count(name) != 0;
}

Eigen::MatrixXd& ParamStore::value(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end())
    throw ConfigError("unknown parameter '" + name + "'");
  return it->second.value;
}

const Eigen::MatrixXd& ParamStore::value(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end())
    throw ConfigError("unknown parameter '" + name + "'");
  return it->second.value;
}

Eigen::MatrixXd& ParamStore::grad(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end())
    throw ConfigError("unknown parameter '" + name + "'");
  return it->second.grad;
}

const Eigen::MatrixXd& ParamStore::grad(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end())
    throw ConfigError("unknown parameter '" + name + "'");
  return it->second.grad;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, slot] : slots_)
    total += static_cast<std::size_t>(slot.value.size());
  return total;
}

void ParamStore::zero_grads() {
  for (auto& [name, slot] : slots_) slot.grad.setZero();
}

void ParamStore::adamax_step(double learning_rate, double weight_decay) {
  for (const auto& [name, slot] : slots_) {
    if (!slot.grad.allFinite())
      throw NumericalError("non-finite gradient in parameter '" + name + "'");
  }
  ++step_;
  const double correction =
      1.0 - std::pow(kBeta1, static_cast<double>(step_));
  for (auto& [name, slot] : slots_) {
    if (weight_decay > 0.0) {
      slot.value *= (1.0 - learning_rate * weight_decay);
    }
    slot.moment = kBeta1 * slot.moment + (1.0 - kBeta1) * slot.grad;
    slot.inf_norm =
        (kBeta2 * slot.inf_norm).cwiseMax(slot.grad.cwiseAbs());
    // Entries whose infinity norm is still zero have never seen a
    // gradient; their update is zero.
    const Eigen::ArrayXXd update =
        (slot.inf_norm.array() > 0.0)
            .select(slot.moment.array() / slot.inf_norm.array(), 0.0);
    slot.value.array() -= (learning_rate / correction) * update;
  }
}

}  // namespace regimevar::nn
