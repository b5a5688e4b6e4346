#pragma once

#include <cstdint>
#include <vector>

#include "pgrec/tape.hpp"

namespace pgrec {

// Adam with bias correction. One state instance drives one parameter set;
// identical inputs produce bitwise-identical outputs for a fixed kernel
// backend.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;  // first moments, one per parameter
  std::vector<Matrix> v;  // second moments

  void init(const std::vector<Parameter*>& params);
  bool initialized() const { return !m.empty(); }
};

// Applies one Adam update to every parameter from its accumulated gradient.
// Shapes are checked against the state; the step counter advances once.
void adam_step(const std::vector<Parameter*>& params, AdamState& state);

}  // namespace pgrec
