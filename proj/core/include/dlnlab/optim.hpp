#ifndef DLNLAB_OPTIM_HPP
#define DLNLAB_OPTIM_HPP

#include <vector>

#include "dlnlab/tensor.hpp"

namespace dlnlab {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  void zero_grad();
  void step();  // consumes Parameter::grad
  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Array m;
    Array v;
  };
  std::vector<Parameter*> params_;
  std::vector<Moments> moments_;
  AdamConfig cfg_;
  int64_t step_ = 0;
};

}  // namespace dlnlab

#endif  // DLNLAB_OPTIM_HPP
