#pragma once

#include <cstdint>

#include "cabkgc/model.hpp"

namespace cabkgc {

struct AdamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  Parameters m;  // first-moment accumulators, shapes mirror Parameters
  Parameters v;  // second-moment accumulators
  std::uint64_t step = 0;

  static OptimizerState zeros(const ModelConfig& cfg);
};

// Standard bias-corrected Adam update, applied in place. Throws ShapeMismatch
// when grads or the state do not mirror params.
void adam_step(Parameters& params, const Parameters& grads,
               OptimizerState& state, const AdamConfig& cfg);

}  // namespace cabkgc
