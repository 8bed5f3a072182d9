#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bitloupe/diff.hpp"
#include "bitloupe/model.hpp"
#include "bitloupe/tasks.hpp"

namespace bitloupe {

enum class RecoveryMode { ResidualZeroing, ResidualAttenuation, TensorRestoration };
enum class MetricDirection { HigherBetter, LowerBetter };

const char* recovery_mode_name(RecoveryMode m);
const char* metric_direction_name(MetricDirection d);

struct RecoveryOutcome {
  RecoveryMode mode = RecoveryMode::ResidualZeroing;
  MetricDirection direction = MetricDirection::LowerBetter;
  double baseline_metric = 0.0;
  double corrupted_metric = 0.0;
  double recovered_metric = 0.0;
  double recovery_percentage = 0.0;
};

// Inference-time mitigation: sets alpha[block] = attenuation (default full
// zeroing) and touches no weight bits, so the stored parameter identity is
// unchanged. attenuation must lie in [0, 1).
ModelState recover_self(const ModelState& m, int block, float attenuation = 0.0f);

// Targeted restoration from the clean reference. Default granularity is the
// whole tensor for any tensor with findings (the digest already proves it
// differs, and a full copy cannot miss co-located flips); element_patch
// restores only the affected elements' stored bytes.
ModelState recover_diff(const ModelState& faulty, const ModelState& clean,
                        const LocalizationResult& result,
                        bool element_patch = false);

// (recovered - corrupted) / (baseline - corrupted) * 100 for higher-better
// metrics; sign-flipped for lower-better ones (loss). baseline must differ
// from corrupted.
double compute_recovery(double baseline, double corrupted, double recovered,
                        MetricDirection direction);

RecoveryOutcome make_outcome(RecoveryMode mode, MetricDirection direction,
                             double baseline, double corrupted, double recovered);

struct AttenuationSweepPoint {
  float attenuation = 0.0f;
  double loss = 0.0;
};

// Evaluates attenuation values (default {0.0, 0.1, ..., 0.9}) for the given
// block and returns the loss-minimizing one plus the full table.
std::pair<float, std::vector<AttenuationSweepPoint>> sweep_attenuation(
    const ModelState& m, int block, const SyntheticTaskSet& X,
    std::span<const float> values = {});

}  // namespace bitloupe
