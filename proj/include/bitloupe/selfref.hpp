#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bitloupe/metrics.hpp"
#include "bitloupe/model.hpp"
#include "bitloupe/tasks.hpp"

namespace bitloupe {

// Residual-scaling probe values. 1.0 is excluded by construction (it is the
// nominal operating point and contributes zero by definition); the default
// set brackets it on both sides inside the diagnostically useful band.
struct ScalingSet {
  std::vector<double> values;

  static ScalingSet default_set();  // {0.6 .. 0.9, 1.1 .. 1.4}
  void validate() const;            // non-empty, all > 0, 1.0 excluded
};

struct SensitivityReport {
  std::string checkpoint_digest;
  std::string input_set_id;
  std::vector<double> alphas;
  double base_loss = 0.0;
  // delta_loss[block][alpha index] = Loss(block, alpha) - base_loss
  std::vector<std::vector<double>> delta_loss;
  // bss[block] = sum over alphas of |delta_loss|, exactly
  std::vector<double> bss;
  int suspected_block = -1;  // argmax bss, ties to the lowest index
  // Uncalibrated confidence signal: max(bss) / median(bss over all blocks).
  double bss_max_over_median = 0.0;
  std::uint64_t forward_passes = 0;
};

// Loss under with_alpha(m, block, alpha) minus the loss of m as given, both
// mean cross-entropy over X. The standalone form recomputes the base; the
// full scan computes it once.
double delta_loss(const ModelState& m, int block, double alpha,
                  const SyntheticTaskSet& X);

// Dense (alpha, delta_loss) curve for one block over [lo, hi] with the given
// step. Grid points are snapped so a sample at 1.0 is exactly 1.0 (and its
// delta exactly zero).
std::vector<std::pair<double, double>> alpha_sweep(const ModelState& m,
                                                   int block,
                                                   const SyntheticTaskSet& X,
                                                   double lo = 0.2,
                                                   double hi = 1.8,
                                                   double step = 0.1);

// Full (block x alpha) scan; probes use per-cell scaling views so m itself
// is never modified and every block runs at nominal scale afterwards.
SensitivityReport localize_self(const ModelState& m, const SyntheticTaskSet& X,
                                const ScalingSet& A);

}  // namespace bitloupe
