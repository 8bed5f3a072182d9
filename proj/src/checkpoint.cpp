#include "bitloupe/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace bitloupe {

namespace {

constexpr char kMagic[4] = {'B', 'L', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t raw;
  std::memcpy(&raw, &v, 4);
  put_u32(out, raw);
}

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  float f32() {
    const std::uint32_t raw = u32();
    float v;
    std::memcpy(&v, &raw, 4);
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<std::uint8_t> blob(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> b(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error("truncated checkpoint");
    }
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ModelState& m, const std::filesystem::path& path) {
  m.validate();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.config.n_blocks));
  put_u32(out, static_cast<std::uint32_t>(m.config.d_model));
  put_u32(out, static_cast<std::uint32_t>(m.config.n_heads));
  put_u32(out, static_cast<std::uint32_t>(m.config.d_ff));
  put_u32(out, static_cast<std::uint32_t>(m.config.vocab_size));
  put_u32(out, static_cast<std::uint32_t>(m.config.max_seq_len));
  put_u64(out, m.config.seed);
  for (float a : m.alpha) {
    put_f32(out, a);
  }
  put_u32(out, static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& [name, tensor] : m.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(tensor->dtype()));
    put_u32(out, static_cast<std::uint32_t>(tensor->shape().size()));
    for (std::int64_t e : tensor->shape()) {
      put_u64(out, static_cast<std::uint64_t>(e));
    }
    put_f32(out, tensor->quant_scale());
    out.insert(out.end(), tensor->raw_bytes().begin(), tensor->raw_bytes().end());
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open checkpoint for writing: " +
                             path.string());
  }
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw std::runtime_error("checkpoint write failed: " + path.string());
  }
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (r.str(4) != std::string(kMagic, 4)) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  if (r.u32() != kVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  ModelState m;
  m.config.n_blocks = static_cast<int>(r.u32());
  m.config.d_model = static_cast<int>(r.u32());
  m.config.n_heads = static_cast<int>(r.u32());
  m.config.d_ff = static_cast<int>(r.u32());
  m.config.vocab_size = static_cast<int>(r.u32());
  m.config.max_seq_len = static_cast<int>(r.u32());
  m.config.seed = r.u64();
  m.config.validate();
  m.alpha.resize(static_cast<std::size_t>(m.config.n_blocks));
  for (float& a : m.alpha) {
    a = r.f32();
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const Dtype dtype = static_cast<Dtype>(r.u8());
    if (dtype != Dtype::f32 && dtype != Dtype::i8) {
      throw std::runtime_error("unknown dtype tag in checkpoint");
    }
    const std::uint32_t ndim = r.u32();
    std::vector<std::int64_t> shape(ndim);
    for (auto& e : shape) {
      e = static_cast<std::int64_t>(r.u64());
    }
    const float scale = r.f32();
    const std::size_t nbytes = shape_element_count(shape) * dtype_size(dtype);
    auto tensor = WeightTensor::from_raw(name, dtype, std::move(shape), scale,
                                         r.blob(nbytes));
    m.tensors.emplace(std::move(name), std::make_shared<WeightTensor>(std::move(tensor)));
  }
  if (!r.exhausted()) {
    throw std::runtime_error("trailing bytes in checkpoint");
  }
  m.validate();
  return m;
}

std::array<std::uint8_t, 32> checkpoint_digest(const ModelState& m) {
  std::vector<std::uint8_t> buf;
  for (const auto& [name, tensor] : m.tensors) {
    put_u64(buf, name.size());
    buf.insert(buf.end(), name.begin(), name.end());
    const TensorDigest d = digest_tensor(*tensor);
    buf.insert(buf.end(), d.digest.begin(), d.digest.end());
  }
  return sha256(buf);
}

std::string checkpoint_digest_hex(const ModelState& m) {
  return hex_string(checkpoint_digest(m));
}

std::string file_digest_hex(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open file for digest: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return hex_string(sha256(bytes));
}

}  // namespace bitloupe
