#pragma once

#include <filesystem>

#include "bitloupe/fit.hpp"
#include "bitloupe/model.hpp"
#include "bitloupe/tasks.hpp"

namespace bitloupe::testing {

// The shared fitted fixture: 8 blocks, d_model 64, 4 heads, d_ff 256,
// vocab 256, fitted on the modular-addition task with residual-scale
// jitter so that healthy blocks tolerate rescaling, then quantized to int8
// for the sign-bit experiments. Evaluation uses (a prefix of) the fitting
// corpus: the fixture's job is brittle, fully-determined recall, which is
// what gives bit flips any behavioral surface at this scale.
//
// Building the fixture costs a couple of minutes, so it is cached on disk
// (BITLOUPE_FIXTURE_DIR, default ./bitloupe-fixture-cache) keyed by the
// recipe; concurrent builders write-then-rename and converge on identical
// bytes.
struct Fixture {
  ModelState clean_f32;
  ModelState clean_i8;
  SyntheticTaskSet eval_set;
  double baseline_loss_i8 = 0.0;
  double baseline_accuracy_i8 = 0.0;
};

ModelConfig fixture_config();
FitOptions fixture_fit_options();
TaskSpec fixture_eval_spec();

const Fixture& fitted_fixture();

// Small unfitted configuration for cheap structural tests.
ModelConfig tiny_config();

}  // namespace bitloupe::testing
