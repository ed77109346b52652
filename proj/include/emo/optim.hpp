#pragma once

#include <limits>
#include <map>
#include <string>

#include "emo/params.hpp"

namespace emo {

/// Adam with decoupled weight decay:
///   p <- p * (1 - lr * wd);  m, v moment updates;  p <- p - lr * m_hat / (sqrt(v_hat) + eps).
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double eps, double beta1 = 0.9, double beta2 = 0.999);

  /// Updates every tensor of params that has a gradient of the same name.
  void step(ParamStore& params, const ParamStore& grads);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_, weight_decay_, eps_, beta1_, beta2_;
  long t_ = 0;
  std::map<std::string, ad::Matrix> m_, v_;
};

/// Reduce-on-plateau for a minimized metric. A value counts as an improvement
/// when it is below best * (1 - threshold). After more than `patience`
/// consecutive non-improving epochs the rate is multiplied by factor.
class ReduceLROnPlateau {
 public:
  ReduceLROnPlateau(int patience, double factor, double threshold = 1e-4, double min_lr = 0.0);

  /// Returns the learning rate to use for the next epoch.
  double step(double metric, double current_lr);

  int bad_epochs() const { return bad_epochs_; }

 private:
  int patience_;
  double factor_, threshold_, min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

/// Tracks the best (lowest) metric and signals a stop after `patience`
/// epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Returns true when this epoch is a new best.
  bool update(double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_best_ = 0;
};

}  // namespace emo
