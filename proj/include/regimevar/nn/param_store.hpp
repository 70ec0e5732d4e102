#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace regimevar::nn {

/// Named parameter tensors with paired gradient buffers and AdaMax
/// optimizer state. A store is owned by a single training run; trained
/// snapshots are copied out and treated as immutable.
class ParamStore {
 public:
  Eigen::MatrixXd& add(const std::string& name, Eigen::Index rows,
                       Eigen::Index cols);

  bool contains(const std::string& name) const;
  Eigen::MatrixXd& value(const std::string& name);
  const Eigen::MatrixXd& value(const std::string& name) const;
  Eigen::MatrixXd& grad(const std::string& name);
  const Eigen::MatrixXd& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  long step_count() const { return step_; }

  void zero_grads();

  /// Published AdaMax update (beta1 = 0.9 with bias correction,
  /// infinity-norm accumulator beta2 = 0.999). Decoupled weight decay is
  /// applied as theta *= (1 - lr * wd) before the update. Throws
  /// NumericalError on a non-finite gradient.
  void adamax_step(double learning_rate, double weight_decay);

 private:
  struct Slot {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd moment;    // exponential first moment
    Eigen::MatrixXd inf_norm;  // exponentially decayed infinity norm
  };

  std::map<std::string, Slot> slots_;
  long step_ = 0;
};

}  // namespace regimevar::nn
