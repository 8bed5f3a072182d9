#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bitloupe {

enum class Dtype : std::uint8_t { f32 = 0, i8 = 1 };

const char* dtype_name(Dtype d);
Dtype parse_dtype(std::string_view s);
std::size_t dtype_size(Dtype d);
int bits_per_element(Dtype d);

// Flat row-major element index plus a bit position inside the stored
// element. Bit 0 is the least-significant stored bit: for i8 bit 7 is the
// two's-complement sign, for f32 bit 31 is the IEEE-754 sign and bits
// 30..23 the exponent.
struct BitAddress {
  std::string tensor_name;
  std::size_t element_index = 0;
  int bit_index = 0;

  auto operator<=>(const BitAddress&) const = default;
};

std::string to_string(const BitAddress& a);

// Named, shaped numeric array with a declared bit-level storage format.
// The stored bytes are canonical; the float view is derived from them at
// construction (and after any bit edit), so faults always live in storage.
// Instances are immutable after construction and safe to share across
// threads.
class WeightTensor {
 public:
  WeightTensor() = default;

  static WeightTensor from_floats(std::string name, std::vector<std::int64_t> shape,
                                  std::vector<float> values);
  static WeightTensor from_int8(std::string name, std::vector<std::int64_t> shape,
                                std::vector<std::int8_t> values, float quant_scale);
  // Raw storage bytes, little-endian elements in row-major order. Unlike
  // from_int8 this does not enforce the quantizer's [-127, 127] range:
  // fault-injected checkpoints can legitimately hold -128 (a sign flip of a
  // stored zero) and must still round-trip; the dequantized view simply
  // extends e * quant_scale to that value.
  static WeightTensor from_raw(std::string name, Dtype dtype,
                               std::vector<std::int64_t> shape, float quant_scale,
                               std::vector<std::uint8_t> bytes);

  const std::string& name() const { return name_; }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  Dtype dtype() const { return dtype_; }
  // Symmetric per-tensor scale; meaningful only for i8 (1.0 otherwise).
  float quant_scale() const { return quant_scale_; }
  std::size_t element_count() const { return floats_.size(); }
  std::span<const std::uint8_t> raw_bytes() const { return bytes_; }

  // Dequantized compute view: i8 element e maps to e * quant_scale, exactly.
  const std::vector<float>& floats() const { return floats_; }
  float element_as_float(std::size_t index) const { return floats_.at(index); }
  // Stored bits of one element, zero-extended to 32 bits.
  std::uint32_t element_bits(std::size_t index) const;

  WeightTensor renamed(std::string new_name) const;

 private:
  void rebuild_float_view();
  void rebuild_float_element(std::size_t index);

  friend WeightTensor flip_bit(const WeightTensor&, const BitAddress&);

  std::string name_;
  std::vector<std::int64_t> shape_;
  Dtype dtype_ = Dtype::f32;
  float quant_scale_ = 1.0f;
  std::vector<std::uint8_t> bytes_;
  std::vector<float> floats_;
};

std::size_t shape_element_count(const std::vector<std::int64_t>& shape);

// Returns a copy differing from t in exactly the addressed stored bit; all
// metadata unchanged. Involution: flipping twice restores t bit for bit.
WeightTensor flip_bit(const WeightTensor& t, const BitAddress& addr);

struct TensorDigest {
  std::string tensor_name;
  std::array<std::uint8_t, 32> digest{};

  std::string hex() const;
  bool same_content(const TensorDigest& other) const {
    return digest == other.digest;
  }
  bool operator==(const TensorDigest&) const = default;
};

// SHA-256 over (dtype tag, shape extents, quant_scale bytes for i8, raw
// element bytes in storage order). The name is deliberately excluded so
// renames do not change identity; equal stored content implies equal digest.
TensorDigest digest_tensor(const WeightTensor& t);

// SHA-256 of arbitrary bytes, shared by checkpoint/file digests.
std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes);
std::string hex_string(std::span<const std::uint8_t> bytes);

// Symmetric per-tensor int8 quantization: scale = max|v| / 127 (1 if all
// zero), elements rounded half away from zero and clamped to [-127, 127].
WeightTensor quantize(const WeightTensor& t);

}  // namespace bitloupe
