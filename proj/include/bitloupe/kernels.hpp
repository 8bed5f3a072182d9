#pragma once

#include <cstddef>
#include <string_view>

namespace bitloupe::kern {

// Float kernels used by the forward/backward passes and the divergence
// metrics. Variants are selected at runtime and every variant must return
// bit-identical results to the scalar reference. For reductions that means
// a fixed evaluation order, shared by all implementations:
//
//   - accumulate into eight stride-8 lanes (lane j sums elements j, j+8, ...),
//   - combine lanes as (l0+l4, l1+l5, l2+l6, l3+l7), then pairwise
//     (p0+p2, p1+p3), then the final add,
//   - fold the length % 8 tail in serially, in index order.
//
// Multiplies and adds are never fused (the build sets -ffp-contract=off).
// Elementwise kernels have no ordering freedom, so they are exact by
// construction.
struct KernelTable {
  const char* name;

  // sum_i x[i] * y[i]
  float (*dot)(const float* x, const float* y, std::size_t n);
  // sum_i x[i]^2
  float (*sum_squares)(const float* x, std::size_t n);
  // sum_i (x[i] - y[i])^2
  float (*squared_distance)(const float* x, const float* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(float a, const float* x, float* y, std::size_t n);
  // out[i] = h[i] + a * d[i]
  void (*scale_add)(const float* h, const float* d, float a, float* out,
                    std::size_t n);
  // w row-major [out_dim][in_dim]; y[o] = dot(w_o, x)
  void (*matvec_rows)(const float* w, const float* x, float* y,
                      std::size_t out_dim, std::size_t in_dim);
};

const KernelTable& scalar();

// nullptr when the binary was built without the AVX2 unit or the CPU lacks
// the feature.
const KernelTable* avx2();

// Runtime selection: AVX2 when available, else scalar. Overridable with
// BITLOUPE_KERNELS=scalar|avx2|auto (checked once, at first use).
const KernelTable& active();

std::string_view active_name();

}  // namespace bitloupe::kern
