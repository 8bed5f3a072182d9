#pragma once

#include <functional>

#include "bitloupe/model.hpp"
#include "bitloupe/tasks.hpp"

namespace bitloupe {

// Short teacher-forced fitting pass on the synthetic task. Deterministic in
// every bit given (init, options): fixed batch schedule, fixed-order
// gradient reduction, Adam with bias correction. float32 models only.
struct FitOptions {
  TaskSpec data{TaskKind::Copy, 11, 256, 32};
  int batch = 16;
  int steps = 400;
  float lr = 2.5e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  // Residual-scale jitter: during fitting each block's residual delta is
  // scaled by a per-(step, sequence, block) factor drawn from
  // [jitter_lo, jitter_hi], and dropped outright (scale 0) with probability
  // drop_prob. The fitted model then tolerates rescaling or losing any
  // single block, which is what makes nominal-scale probing diagnostic:
  // healthy blocks respond weakly, corrupted ones stand out.
  bool scale_jitter = false;
  float jitter_lo = 0.5f;
  float jitter_hi = 1.5f;
  float drop_prob = 0.1f;
  std::uint64_t jitter_seed = 1;
  // Called after each step with the step's training loss; may be empty.
  std::function<void(int step, double loss)> on_step;
};

ModelState fit_model(const ModelState& init, const FitOptions& opts);

}  // namespace bitloupe
