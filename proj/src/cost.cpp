#include "bitloupe/cost.hpp"

#include <stdexcept>

namespace bitloupe {

CostSnapshot snapshot(const CostLedger& ledger) {
  CostSnapshot s;
  s.hidden_state_comparisons = ledger.hidden_state_comparisons.load();
  s.activation_comparisons = ledger.activation_comparisons.load();
  s.hash_computations = ledger.hash_computations.load();
  s.element_comparisons = ledger.element_comparisons.load();
  return s;
}

CostModelResult cost_model(std::uint64_t n_blocks,
                           std::uint64_t tensors_per_block,
                           std::uint64_t elems_per_tensor) {
  if (n_blocks == 0 || tensors_per_block == 0 || elems_per_tensor == 0) {
    throw std::invalid_argument("cost_model inputs must be positive");
  }
  CostModelResult r;
  r.brute = n_blocks * tensors_per_block * elems_per_tensor;
  r.staged = n_blocks + 2 + 3 + elems_per_tensor;
  return r;
}

}  // namespace bitloupe
