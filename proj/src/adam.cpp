#include "spherad/adam.hpp"

#include <cmath>
#include <string>

#include "spherad/error.hpp"

namespace spherad {

AdamState::AdamState(AdamConfig config, const std::vector<Tensor*>& params)
    : cfg(config) {
  if (!(cfg.lr > 0.0)) throw ConfigError("adam learning rate must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(cfg.eps > 0.0)) throw ConfigError("adam epsilon must be positive");
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.emplace_back(p->rows, p->cols);
    v.emplace_back(p->rows, p->cols);
  }
}

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step group size mismatch");
  state.step += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g))
      throw ShapeError("adam_step gradient shape mismatch at parameter " +
                       std::to_string(i) + ": " + p.shape_str() + " vs " +
                       g.shape_str());
    if (!all_finite(g))
      throw NumericError("non-finite gradient in adam_step at parameter " +
                         std::to_string(i));
    Tensor& mi = state.m[i];
    Tensor& vi = state.v[i];
    for (int k = 0; k < p.size(); ++k) {
      mi.v[k] = b1 * mi.v[k] + (1.0 - b1) * g.v[k];
      vi.v[k] = b2 * vi.v[k] + (1.0 - b2) * g.v[k] * g.v[k];
      const double mhat = mi.v[k] / corr1;
      const double vhat = vi.v[k] / corr2;
      p.v[k] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

}  // namespace spherad
