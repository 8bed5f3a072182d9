// AVX2 kernels. Compiled with -mavx2 only; callers gate on runtime CPU
// support. Reduction order matches the scalar reference exactly: one 8-lane
// accumulator, the vextractf128/movehl/shuffle horizontal-add sequence, and
// a serial tail. No FMA, so results are bit-identical to scalar.

#include "bitloupe/kernels.hpp"

#if defined(BITLOUPE_AVX2_TU)

#include <immintrin.h>

namespace bitloupe::kern {
namespace {

// (l0+l4, l1+l5, l2+l6, l3+l7) -> (p0+p2, p1+p3) -> q0+q1
inline float hsum(__m256 acc) {
  const __m128 lo = _mm256_castps256_ps128(acc);
  const __m128 hi = _mm256_extractf128_ps(acc, 1);
  const __m128 p = _mm_add_ps(lo, hi);
  const __m128 q = _mm_add_ps(p, _mm_movehl_ps(p, p));
  const __m128 s = _mm_add_ss(q, _mm_shuffle_ps(q, q, 0x55));
  return _mm_cvtss_f32(s);
}

float dot_avx2(const float* x, const float* y, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    const __m256 a = _mm256_loadu_ps(x + i);
    const __m256 b = _mm256_loadu_ps(y + i);
    acc = _mm256_add_ps(acc, _mm256_mul_ps(a, b));
  }
  float s = hsum(acc);
  for (std::size_t i = n8; i < n; ++i) {
    s += x[i] * y[i];
  }
  return s;
}

float sum_squares_avx2(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    const __m256 a = _mm256_loadu_ps(x + i);
    acc = _mm256_add_ps(acc, _mm256_mul_ps(a, a));
  }
  float s = hsum(acc);
  for (std::size_t i = n8; i < n; ++i) {
    s += x[i] * x[i];
  }
  return s;
}

float squared_distance_avx2(const float* x, const float* y, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
    acc = _mm256_add_ps(acc, _mm256_mul_ps(d, d));
  }
  float s = hsum(acc);
  for (std::size_t i = n8; i < n; ++i) {
    const float d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    const __m256 acc =
        _mm256_add_ps(_mm256_loadu_ps(y + i),
                      _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, acc);
  }
  for (std::size_t i = n8; i < n; ++i) {
    y[i] += a * x[i];
  }
}

void scale_add_avx2(const float* h, const float* d, float a, float* out,
                    std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const std::size_t n8 = n & ~std::size_t{7};
  for (std::size_t i = 0; i < n8; i += 8) {
    const __m256 acc =
        _mm256_add_ps(_mm256_loadu_ps(h + i),
                      _mm256_mul_ps(va, _mm256_loadu_ps(d + i)));
    _mm256_storeu_ps(out + i, acc);
  }
  for (std::size_t i = n8; i < n; ++i) {
    out[i] = h[i] + a * d[i];
  }
}

void matvec_rows_avx2(const float* w, const float* x, float* y,
                      std::size_t out_dim, std::size_t in_dim) {
  for (std::size_t o = 0; o < out_dim; ++o) {
    y[o] = dot_avx2(w + o * in_dim, x, in_dim);
  }
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table{
      "avx2",          dot_avx2,       sum_squares_avx2,
      squared_distance_avx2, axpy_avx2, scale_add_avx2,
      matvec_rows_avx2,
  };
  return &table;
}

}  // namespace bitloupe::kern

#endif  // BITLOUPE_AVX2_TU
