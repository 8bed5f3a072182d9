#pragma once

#include <atomic>
#include <cstdint>

namespace bitloupe {

// Instrumented work counters for the staged differential pipeline.
// Accounting units: one hidden_state comparison per block boundary compared
// (aggregation over the probe set is inside that one unit), one activation
// comparison per sublayer compared, one hash computation per parameter
// region pair digested (block pre-check or single tensor), one element
// comparison per element equality test.
struct CostLedger {
  std::atomic<std::uint64_t> hidden_state_comparisons{0};
  std::atomic<std::uint64_t> activation_comparisons{0};
  std::atomic<std::uint64_t> hash_computations{0};
  std::atomic<std::uint64_t> element_comparisons{0};
};

struct CostSnapshot {
  std::uint64_t hidden_state_comparisons = 0;
  std::uint64_t activation_comparisons = 0;
  std::uint64_t hash_computations = 0;
  std::uint64_t element_comparisons = 0;

  std::uint64_t total() const {
    return hidden_state_comparisons + activation_comparisons +
           hash_computations + element_comparisons;
  }
  bool operator==(const CostSnapshot&) const = default;
};

CostSnapshot snapshot(const CostLedger& ledger);

struct CostModelResult {
  std::uint64_t brute = 0;
  std::uint64_t staged = 0;
};

// brute  = n_blocks * tensors_per_block * elems_per_tensor element diffs.
// staged = n_blocks block comparisons + 2 activation comparisons
//          + 3 hash computations + one tensor scan of elems_per_tensor.
CostModelResult cost_model(std::uint64_t n_blocks,
                           std::uint64_t tensors_per_block,
                           std::uint64_t elems_per_tensor);

}  // namespace bitloupe
