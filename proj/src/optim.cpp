#include "emo/optim.hpp"

#include <cmath>

#include "emo/error.hpp"

namespace emo {

AdamW::AdamW(double lr, double weight_decay, double eps, double beta1, double beta2)
    : lr_(lr), weight_decay_(weight_decay), eps_(eps), beta1_(beta1), beta2_(beta2) {
  if (lr < 0.0 || weight_decay < 0.0 || eps <= 0.0) throw ConfigError("invalid AdamW hyperparameters");
}

void AdamW::step(ParamStore& params, const ParamStore& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : grads.names()) {
    ad::Matrix& p = params.at(name);
    const ad::Matrix& g = grads.at(name);
    auto [mit, m_new] = m_.try_emplace(name, ad::Matrix::Zero(p.rows(), p.cols()));
    auto [vit, v_new] = v_.try_emplace(name, ad::Matrix::Zero(p.rows(), p.cols()));
    ad::Matrix& m = mit->second;
    ad::Matrix& v = vit->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    if (lr_ == 0.0) continue;
    p *= 1.0 - lr_ * weight_decay_;
    p.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

ReduceLROnPlateau::ReduceLROnPlateau(int patience, double factor, double threshold, double min_lr)
    : patience_(patience), factor_(factor), threshold_(threshold), min_lr_(min_lr) {
  if (patience < 0) throw ConfigError("scheduler patience must be >= 0");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("scheduler factor must be in (0, 1)");
}

double ReduceLROnPlateau::step(double metric, double current_lr) {
  if (metric < best_ * (1.0 - threshold_) || !std::isfinite(best_)) {
    best_ = metric;
    bad_epochs_ = 0;
    return current_lr;
  }
  ++bad_epochs_;
  if (bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    return std::max(current_lr * factor_, min_lr_);
  }
  return current_lr;
}

bool EarlyStopping::update(double metric) {
  if (metric < best_) {
    best_ = metric;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

}  // namespace emo
