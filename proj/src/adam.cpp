#include "pgrec/adam.hpp"

#include <cmath>

#include "pgrec/error.hpp"
#include "pgrec/kernels.hpp"

namespace pgrec {

void AdamState::init(const std::vector<Parameter*>& params) {
  m.clear();
  v.clear();
  step = 0;
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Parameter* p : params) {
    m.emplace_back(p->value.rows, p->value.cols);
    v.emplace_back(p->value.rows, p->value.cols);
  }
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state) {
  require(state.lr > 0.0, "adam_step: learning rate must be positive");
  if (!state.initialized()) state.init(params);
  require(state.m.size() == params.size(), "adam_step: state/parameter count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    require(state.m[i].same_shape(p.value) && p.grad.same_shape(p.value),
            "adam_step: shape mismatch for parameter " + p.name);
    kernels::adam_update(p.value.data(), p.grad.data(), state.m[i].data(), state.v[i].data(),
                         p.value.size(), state.lr, state.beta1, state.beta2, state.eps, bc1, bc2);
  }
}

}  // namespace pgrec
