#pragma once

#include <cstdint>
#include <vector>

#include "spherad/tensor.hpp"

namespace spherad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators for one parameter group. The state is
// positional: the i-th moment pair belongs to the i-th parameter passed to
// every adam_step call.
struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  AdamState(AdamConfig config, const std::vector<Tensor*>& params);
};

// One bias-corrected update of `params` in place from matching `grads`.
void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state);

}  // namespace spherad
