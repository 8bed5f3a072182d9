#pragma once

#include <cstdint>
#include <span>

#include "bitloupe/model.hpp"
#include "bitloupe/tasks.hpp"

namespace bitloupe {

// Mean negative log-likelihood (natural log) of targets under softmax(logits).
// logits is seq_len x vocab; accumulation in double.
double cross_entropy(const Matrix& logits, std::span<const int> targets);

// Fraction of positions where argmax(logits) == target; ties break to the
// lowest token id.
double accuracy(const Matrix& logits, std::span<const int> targets);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::uint64_t forward_passes = 0;
};

// Teacher-forced evaluation over the task set; deterministic, sequences
// evaluated in parallel with a fixed-order reduction.
EvalResult evaluate(const ModelState& m, const SyntheticTaskSet& tasks);

}  // namespace bitloupe
