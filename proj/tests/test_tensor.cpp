#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "bitloupe/tensor.hpp"

using namespace bitloupe;

namespace {

WeightTensor small_f32(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::vector<float> v(64);
  for (float& x : v) {
    x = static_cast<float>((rng() >> 40)) * 0x1.0p-24f - 0.5f;
  }
  return WeightTensor::from_floats("t", {4, 16}, std::move(v));
}

}  // namespace

TEST_CASE("int8 sign-bit flip: 1 becomes -127") {
  auto t = WeightTensor::from_int8("w", {3}, {1, 2, 3}, 0.5f);
  auto f = flip_bit(t, {"w", 0, 7});
  CHECK(static_cast<std::int8_t>(f.element_bits(0)) == -127);
  CHECK(f.element_as_float(0) == -127.0f * 0.5f);
  CHECK(f.element_bits(1) == t.element_bits(1));
  CHECK(f.name() == t.name());
  CHECK(f.quant_scale() == t.quant_scale());
}

TEST_CASE("float32 exponent-top-bit flip: 1.0 becomes +inf") {
  auto t = WeightTensor::from_floats("w", {1}, {1.0f});
  CHECK(t.element_bits(0) == 0x3F800000u);
  auto f = flip_bit(t, {"w", 0, 30});
  CHECK(f.element_bits(0) == 0x7F800000u);
  CHECK(std::isinf(f.element_as_float(0)));
}

TEST_CASE("flip_bit is an involution at every address of a 64-element tensor") {
  const auto t = small_f32();
  for (std::size_t e = 0; e < t.element_count(); ++e) {
    for (int bit = 0; bit < 32; ++bit) {
      const BitAddress a{"t", e, bit};
      const auto once = flip_bit(t, a);
      CHECK(once.element_bits(e) != t.element_bits(e));
      const auto twice = flip_bit(once, a);
      REQUIRE(twice.raw_bytes().size() == t.raw_bytes().size());
      CHECK(std::memcmp(twice.raw_bytes().data(), t.raw_bytes().data(),
                        t.raw_bytes().size()) == 0);
    }
  }
  const auto i8 = WeightTensor::from_int8("q", {8}, {0, 1, -1, 5, -5, 127, -127, 64}, 0.25f);
  for (std::size_t e = 0; e < i8.element_count(); ++e) {
    for (int bit = 0; bit < 8; ++bit) {
      const BitAddress a{"q", e, bit};
      const auto twice = flip_bit(flip_bit(i8, a), a);
      CHECK(std::memcmp(twice.raw_bytes().data(), i8.raw_bytes().data(),
                        i8.raw_bytes().size()) == 0);
    }
  }
}

TEST_CASE("flip_bit validates its address") {
  const auto t = small_f32();
  CHECK_THROWS_AS(flip_bit(t, {"other", 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(flip_bit(t, {"t", 64, 0}), std::out_of_range);
  CHECK_THROWS_AS(flip_bit(t, {"t", 0, 32}), std::out_of_range);
  CHECK_THROWS_AS(flip_bit(t, {"t", 0, -1}), std::out_of_range);
  const auto i8 = WeightTensor::from_int8("q", {1}, {1}, 1.0f);
  CHECK_THROWS_AS(flip_bit(i8, {"q", 0, 8}), std::out_of_range);
}

TEST_CASE("digest is deterministic and name-independent") {
  const auto t = small_f32();
  auto copy = t;
  CHECK(digest_tensor(t).digest == digest_tensor(copy).digest);
  CHECK(digest_tensor(t).same_content(digest_tensor(t.renamed("other"))));

  // dtype, shape and scale are part of the preimage
  const auto a = WeightTensor::from_int8("a", {4}, {1, 2, 3, 4}, 0.5f);
  const auto b = WeightTensor::from_int8("a", {4}, {1, 2, 3, 4}, 0.25f);
  const auto c = WeightTensor::from_int8("a", {2, 2}, {1, 2, 3, 4}, 0.5f);
  CHECK_FALSE(digest_tensor(a).same_content(digest_tensor(b)));
  CHECK_FALSE(digest_tensor(a).same_content(digest_tensor(c)));
  CHECK(digest_tensor(a).digest ==
        digest_tensor(WeightTensor::from_int8("z", {4}, {1, 2, 3, 4}, 0.5f)).digest);
}

TEST_CASE("digest catches every single-bit mutation (1e4 trials)") {
  const auto t = small_f32(99);
  const auto base = digest_tensor(t);
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t e = rng() % t.element_count();
    const int bit = static_cast<int>(rng() % 32);
    const auto mutated = flip_bit(t, {"t", e, bit});
    CHECK_FALSE(digest_tensor(mutated).same_content(base));
  }
}

TEST_CASE("quantize: zeros, extremes, rounding") {
  const auto zeros = WeightTensor::from_floats("z", {5}, {0, 0, 0, 0, 0});
  const auto qz = quantize(zeros);
  CHECK(qz.quant_scale() == 1.0f);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(qz.element_as_float(i) == 0.0f);
  }

  const auto t = WeightTensor::from_floats("t", {3}, {2.0f, -2.0f, 1.0f});
  const auto q = quantize(t);
  CHECK(q.quant_scale() == 2.0f / 127.0f);
  CHECK(static_cast<std::int8_t>(q.element_bits(0)) == 127);
  CHECK(static_cast<std::int8_t>(q.element_bits(1)) == -127);

  // exact half rounds away from zero: 63.5 -> 64
  const auto h = quantize(WeightTensor::from_floats("h", {2}, {2.0f, 1.0f}));
  CHECK(static_cast<std::int8_t>(h.element_bits(1)) == 64);

  CHECK_THROWS_AS(
      quantize(WeightTensor::from_floats("n", {1},
                                         {std::numeric_limits<float>::infinity()})),
      std::domain_error);
  CHECK_THROWS_AS(quantize(WeightTensor::from_int8("i", {1}, {1}, 1.0f)),
                  std::invalid_argument);
}

TEST_CASE("quantization roundtrip error is at most scale/2 per element") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<float> v(100);
    for (float& x : v) {
      x = static_cast<float>((rng() >> 40)) * 0x1.0p-24f * 6.0f - 3.0f;
    }
    const auto t = WeightTensor::from_floats("r", {100}, v);
    const auto q = quantize(t);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::fabs(q.element_as_float(i) - v[i]) <= q.quant_scale() / 2 + 1e-9f);
    }
  }
}

TEST_CASE("tensor constructors validate invariants") {
  CHECK_THROWS_AS(WeightTensor::from_floats("x", {2, 3}, {1.0f}),
                  std::invalid_argument);
  CHECK_THROWS_AS(WeightTensor::from_int8("x", {1}, {1}, 0.0f),
                  std::invalid_argument);
  CHECK_THROWS_AS(WeightTensor::from_int8("x", {1}, {-128}, 1.0f),
                  std::invalid_argument);
  CHECK_THROWS_AS(WeightTensor::from_floats("x", {0}, {}), std::invalid_argument);
  // dequantized view is exactly e * scale
  const auto q = WeightTensor::from_int8("q", {3}, {-127, 0, 64}, 0.03125f);
  CHECK(q.element_as_float(0) == -127.0f * 0.03125f);
  CHECK(q.element_as_float(2) == 64.0f * 0.03125f);
}
