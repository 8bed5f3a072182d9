// Scalar reference kernels. These define the numeric contract: every other
// variant must reproduce these results bit for bit.

#include "bitloupe/kernels.hpp"

namespace bitloupe::kern {
namespace {

// Canonical lane combine: (l0+l4, l1+l5, l2+l6, l3+l7) -> (p0+p2, p1+p3) -> s.
// Mirrors the 256-bit halves/128-bit halves/final-add sequence the vector
// variants use, so both sides agree on rounding.
inline float combine_lanes(const float lane[8]) {
  const float p0 = lane[0] + lane[4];
  const float p1 = lane[1] + lane[5];
  const float p2 = lane[2] + lane[6];
  const float p3 = lane[3] + lane[7];
  const float q0 = p0 + p2;
  const float q1 = p1 + p3;
  return q0 + q1;
}

float dot_scalar(const float* x, const float* y, std::size_t n) {
  float lane[8] = {};
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    for (int j = 0; j < 8; ++j) {
      lane[j] += x[i + j] * y[i + j];
    }
  }
  float s = combine_lanes(lane );
  for (std::size_t i = n8; i < n; ++i) {
    s += x[i] * y[i];
  }
  return s;
}

float sum_squares_scalar(const float* x, std::size_t n) {
  float lane[8] = {};
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    for (int j = 0; j < 8; ++j) {
      lane[j] += x[i + j] * x[i + j];
    }
  }
  float s = combine_lanes(lane);
  for (std::size_t i = n8; i < n; ++i) {
    s += x[i] * x[i];
  }
  return s;
}

float squared_distance_scalar(const float* x, const float* y, std::size_t n) {
  float lane[8] = {};
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    for (int j = 0; j < 8; ++j) {
      const float d = x[i + j] - y[i + j];
      lane[j] += d * d;
    }
  }
  float s = combine_lanes(lane);
  for (std::size_t i = n8; i < n; ++i) {
    const float d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += a * x[i];
  }
}

void scale_add_scalar(const float* h, const float* d, float a, float* out,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = h[i] + a * d[i];
  }
}

void matvec_rows_scalar(const float* w, const float* x, float* y,
                        std::size_t out_dim, std::size_t in_dim) {
  for (std::size_t o = 0; o < out_dim; ++o) {
    y[o] = dot_scalar(w + o * in_dim, x, in_dim);
  }
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{
      "scalar",        dot_scalar,       sum_squares_scalar,
      squared_distance_scalar, axpy_scalar, scale_add_scalar,
      matvec_rows_scalar,
  };
  return table;
}

}  // namespace bitloupe::kern
