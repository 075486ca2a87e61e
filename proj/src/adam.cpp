#include "cabkgc/adam.hpp"

#include <cmath>

#include "cabkgc/errors.hpp"

namespace cabkgc {

OptimizerState OptimizerState::zeros(const ModelConfig& cfg) {
  OptimizerState state;
  state.m = Parameters::zeros(cfg);
  state.v = Parameters::zeros(cfg);
  state.step = 0;
  return state;
}

void adam_step(Parameters& params, const Parameters& grads,
               OptimizerState& state, const AdamConfig& cfg) {
  check_same_shape(params, grads, "adam_step gradients");
  check_same_shape(params, state.m, "adam_step first moments");
  check_same_shape(params, state.v, "adam_step second moments");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  auto ps = named_tensors(params);
  auto gs = named_tensors(grads);
  auto ms = named_tensors(state.m);
  auto vs = named_tensors(state.v);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Eigen::MatrixXd& p = *ps[i].tensor;
    const Eigen::MatrixXd& g = *gs[i].tensor;
    Eigen::MatrixXd& m = *ms[i].tensor;
    Eigen::MatrixXd& v = *vs[i].tensor;

    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square())
            .matrix();
    p.array() -= cfg.learning_rate * (m.array() / bc1) /
                 ((v.array() / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace cabkgc
