#include "dlnlab/optim.hpp"

#include <cmath>

namespace dlnlab {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  moments_.reserve(params_.size());
  for (Parameter* p : params_) {
    moments_.push_back({Array::zeros(p->value.shape), Array::zeros(p->value.shape)});
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Moments& mo = moments_[i];
    if (!(p.grad.shape == p.value.shape)) {
      throw ShapeMismatch("adam_step: grad shape " + p.grad.shape.str() +
                          " vs value " + p.value.shape.str());
    }
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      const double g = p.grad.data[k];
      mo.m.data[k] = cfg_.beta1 * mo.m.data[k] + (1.0 - cfg_.beta1) * g;
      mo.v.data[k] = cfg_.beta2 * mo.v.data[k] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = mo.m.data[k] / bc1;
      const double vhat = mo.v.data[k] / bc2;
      p.value.data[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dlnlab
