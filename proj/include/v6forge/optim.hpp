#pragma once

#include <cmath>
#include <vector>

#include "v6forge/autodiff.hpp"

namespace v6forge::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment slots live on the parameters; the
/// step counter lives here.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw ParamError("learning rate must be positive");
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0)
      throw ParamError("Adam betas must be in [0,1)");
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  void step(const std::vector<Parameter*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
      if (p->grad.size() != p->value.size())
        throw StateError("parameter \"" + p->name + "\" has no gradient");
      if (p->adam_m.size() != p->value.size()) {
        p->adam_m = Tensor(p->value.shape());
        p->adam_v = Tensor(p->value.shape());
      }
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        p->adam_m[i] = cfg_.beta1 * p->adam_m[i] + (1.0 - cfg_.beta1) * g;
        p->adam_v[i] = cfg_.beta2 * p->adam_v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = p->adam_m[i] / bc1;
        const double vhat = p->adam_v[i] / bc2;
        p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace v6forge::num
