#pragma once

#include <vector>

#include "bitloupe/model.hpp"

namespace bitloupe::testing {

// Straight-line double-precision forward pass, written independently of the
// runtime implementation (plain loops, no shared kernels). Serves as the
// numeric oracle the production forward must match to ~1e-5 relative.
std::vector<std::vector<double>> reference_logits(const ModelState& m,
                                                  const std::vector<int>& tokens);

}  // namespace bitloupe::testing
