// Runtime kernel selection.

#include "bitloupe/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace bitloupe::kern {

#if defined(BITLOUPE_AVX2_TU)
const KernelTable* avx2_table_impl();
#endif

const KernelTable* avx2() {
#if defined(BITLOUPE_AVX2_TU)
  if (__builtin_cpu_supports("avx2")) {
    return avx2_table_impl();
  }
#endif
  return nullptr;
}

namespace {

const KernelTable* select() {
  const char* env = std::getenv("BITLOUPE_KERNELS");
  const std::string mode = env ? env : "auto";
  if (mode == "scalar") {
    return &scalar();
  }
  if (mode == "avx2") {
    const KernelTable* t = avx2();
    if (!t) {
      throw std::runtime_error(
          "BITLOUPE_KERNELS=avx2 requested but AVX2 is unavailable");
    }
    return t;
  }
  if (mode != "auto") {
    throw std::runtime_error("unknown BITLOUPE_KERNELS value: " + mode);
  }
  if (const KernelTable* t = avx2()) {
    return t;
  }
  return &scalar();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable* table = select();
  return *table;
}

std::string_view active_name() { return active().name; }

}  // namespace bitloupe::kern
