#include "bitloupe/tensor.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bitloupe {

const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::f32:
      return "float32";
    case Dtype::i8:
      return "int8";
  }
  throw std::logic_error("bad dtype");
}

Dtype parse_dtype(std::string_view s) {
  if (s == "float32") return Dtype::f32;
  if (s == "int8") return Dtype::i8;
  throw std::invalid_argument("unknown dtype: " + std::string(s));
}

std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 1; }

int bits_per_element(Dtype d) { return d == Dtype::f32 ? 32 : 8; }

std::string to_string(const BitAddress& a) {
  return a.tensor_name + "[" + std::to_string(a.element_index) + "]:b" +
         std::to_string(a.bit_index);
}

std::size_t shape_element_count(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (std::int64_t e : shape) {
    if (e <= 0) {
      throw std::invalid_argument("tensor shape extents must be positive");
    }
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

void WeightTensor::rebuild_float_element(std::size_t i) {
  if (dtype_ == Dtype::f32) {
    float v;
    std::memcpy(&v, bytes_.data() + i * 4, 4);
    floats_[i] = v;
  } else {
    const auto e = static_cast<std::int8_t>(bytes_[i]);
    floats_[i] = static_cast<float>(e) * quant_scale_;
  }
}

void WeightTensor::rebuild_float_view() {
  floats_.resize(bytes_.size() / dtype_size(dtype_));
  for (std::size_t i = 0; i < floats_.size(); ++i) {
    rebuild_float_element(i);
  }
}

WeightTensor WeightTensor::from_floats(std::string name,
                                       std::vector<std::int64_t> shape,
                                       std::vector<float> values) {
  if (shape_element_count(shape) != values.size()) {
    throw std::invalid_argument("shape does not match element count for " + name);
  }
  WeightTensor t;
  t.name_ = std::move(name);
  t.shape_ = std::move(shape);
  t.dtype_ = Dtype::f32;
  t.quant_scale_ = 1.0f;
  t.bytes_.resize(values.size() * 4);
  std::memcpy(t.bytes_.data(), values.data(), t.bytes_.size());
  t.floats_ = std::move(values);
  return t;
}

WeightTensor WeightTensor::from_int8(std::string name,
                                     std::vector<std::int64_t> shape,
                                     std::vector<std::int8_t> values,
                                     float quant_scale) {
  if (shape_element_count(shape) != values.size()) {
    throw std::invalid_argument("shape does not match element count for " + name);
  }
  if (!(quant_scale > 0.0f)) {
    throw std::invalid_argument("quant_scale must be positive");
  }
  for (std::int8_t v : values) {
    if (v < -127 || v > 127) {
      throw std::invalid_argument("int8 elements must lie in [-127, 127]");
    }
  }
  WeightTensor t;
  t.name_ = std::move(name);
  t.shape_ = std::move(shape);
  t.dtype_ = Dtype::i8;
  t.quant_scale_ = quant_scale;
  t.bytes_.resize(values.size());
  std::memcpy(t.bytes_.data(), values.data(), values.size());
  t.rebuild_float_view();
  return t;
}

WeightTensor WeightTensor::from_raw(std::string name, Dtype dtype,
                                    std::vector<std::int64_t> shape,
                                    float quant_scale,
                                    std::vector<std::uint8_t> bytes) {
  const std::size_t count = shape_element_count(shape);
  if (count * dtype_size(dtype) != bytes.size()) {
    throw std::invalid_argument("raw byte size does not match shape for " + name);
  }
  if (dtype == Dtype::i8 && !(quant_scale > 0.0f)) {
    throw std::invalid_argument("quant_scale must be positive");
  }
  WeightTensor t;
  t.name_ = std::move(name);
  t.shape_ = std::move(shape);
  t.dtype_ = dtype;
  t.quant_scale_ = dtype == Dtype::i8 ? quant_scale : 1.0f;
  t.bytes_ = std::move(bytes);
  t.rebuild_float_view();
  return t;
}

std::uint32_t WeightTensor::element_bits(std::size_t index) const {
  if (index >= element_count()) {
    throw std::out_of_range("element index out of range");
  }
  if (dtype_ == Dtype::f32) {
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + index * 4, 4);
    return v;
  }
  return bytes_[index];
}

WeightTensor WeightTensor::renamed(std::string new_name) const {
  WeightTensor t = *this;
  t.name_ = std::move(new_name);
  return t;
}

WeightTensor flip_bit(const WeightTensor& t, const BitAddress& addr) {
  if (addr.tensor_name != t.name()) {
    throw std::invalid_argument("bit address names tensor '" + addr.tensor_name +
                                "' but was applied to '" + t.name() + "'");
  }
  if (addr.element_index >= t.element_count()) {
    throw std::out_of_range("element index " + std::to_string(addr.element_index) +
                            " out of range for " + t.name());
  }
  if (addr.bit_index < 0 || addr.bit_index >= bits_per_element(t.dtype())) {
    throw std::out_of_range("bit index " + std::to_string(addr.bit_index) +
                            " out of range for " + dtype_name(t.dtype()));
  }
  WeightTensor out = t;
  const std::size_t byte =
      addr.element_index * dtype_size(t.dtype()) +
      static_cast<std::size_t>(addr.bit_index) / 8;
  out.bytes_[byte] ^= static_cast<std::uint8_t>(1u << (addr.bit_index % 8));
  out.rebuild_float_element(addr.element_index);
  return out;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return out;
}

std::string hex_string(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

std::string TensorDigest::hex() const { return hex_string(digest); }

TensorDigest digest_tensor(const WeightTensor& t) {
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + t.shape().size() * 8 + t.raw_bytes().size());
  buf.push_back(static_cast<std::uint8_t>(t.dtype()));
  const auto append_u64 = [&buf](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  };
  append_u64(t.shape().size());
  for (std::int64_t e : t.shape()) {
    append_u64(static_cast<std::uint64_t>(e));
  }
  if (t.dtype() == Dtype::i8) {
    const float s = t.quant_scale();
    std::uint32_t raw;
    std::memcpy(&raw, &s, 4);
    for (int i = 0; i < 4; ++i) {
      buf.push_back(static_cast<std::uint8_t>(raw >> (8 * i)));
    }
  }
  buf.insert(buf.end(), t.raw_bytes().begin(), t.raw_bytes().end());
  return TensorDigest{t.name(), sha256(buf)};
}

WeightTensor quantize(const WeightTensor& t) {
  if (t.dtype() != Dtype::f32) {
    throw std::invalid_argument("quantize expects a float32 tensor");
  }
  float max_abs = 0.0f;
  for (float v : t.floats()) {
    if (!std::isfinite(v)) {
      throw std::domain_error("quantize requires finite values");
    }
    max_abs = std::max(max_abs, std::fabs(v));
  }
  const float scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
  std::vector<std::int8_t> q(t.element_count());
  for (std::size_t i = 0; i < q.size(); ++i) {
    // std::round is round-half-away-from-zero.
    float r = std::round(t.floats()[i] / scale);
    r = std::min(127.0f, std::max(-127.0f, r));
    q[i] = static_cast<std::int8_t>(r);
  }
  return WeightTensor::from_int8(t.name(), t.shape(), std::move(q), scale);
}

}  // namespace bitloupe
