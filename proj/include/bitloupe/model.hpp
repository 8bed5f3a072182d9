#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bitloupe/tensor.hpp"

namespace bitloupe {

struct ModelConfig {
  int n_blocks = 0;
  int d_model = 0;
  int n_heads = 0;
  int d_ff = 0;
  int vocab_size = 0;
  int max_seq_len = 0;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
  bool operator==(const ModelConfig&) const = default;
};

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

  float* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const float* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * cols;
  }
  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

using TensorPtr = std::shared_ptr<const WeightTensor>;
// std::map keys give the canonical (lexicographic) tensor order used by
// checkpoints, digests and selection policies.
using TensorMap = std::map<std::string, TensorPtr>;

// Full parameter set plus per-block residual scaling. Tensors are shared
// immutably between states; alpha is a cheap per-state vector, so scaling
// views never copy weights.
struct ModelState {
  ModelConfig config;
  TensorMap tensors;
  std::vector<float> alpha;  // length n_blocks, nominal 1.0

  const WeightTensor& tensor(const std::string& name) const;
  void validate() const;  // schema + invariant check, throws
};

// Architecture schema ----------------------------------------------------

inline constexpr const char* kSublayerTags[] = {"attn.q", "attn.k", "attn.v",
                                                "attn.o", "mlp.up", "mlp.down"};

std::string block_tensor_name(int block, std::string_view sublayer);
// "block.<i>.<sublayer>" -> (i, sublayer); false for embed/unembed.
bool parse_block_tensor_name(const std::string& name, int& block,
                             std::string& sublayer);
std::vector<std::string> schema_tensor_names(const ModelConfig& config);
std::vector<std::int64_t> schema_tensor_shape(const ModelConfig& config,
                                              const std::string& name);

// Forward pass -----------------------------------------------------------

struct CaptureFlags {
  bool hidden_states = false;  // per-block boundary states
  bool sublayers = false;      // attention / MLP contributions per block
};

struct ForwardTrace {
  // hidden[0] is the embedded input; hidden[i + 1] the output of block i.
  std::vector<Matrix> hidden;
  std::vector<Matrix> attn_out;  // per block
  std::vector<Matrix> mlp_out;   // per block
  Matrix logits;  // seq_len x vocab_size
  // Non-finite activations are recorded, not rejected: exponent-bit faults
  // legitimately produce them.
  bool saw_nonfinite = false;
};

// Deterministic init from config.seed; alpha all 1.0.
ModelState init_model(const ModelConfig& config);

// Shared numeric primitives; the forward pass and the fitting pass must
// agree on these bit for bit.
float rms_inverse_scale(const float* x, int n);
Matrix sinusoidal_positions(int seq_len, int d_model);

// Pre-norm decoder blocks. Block i computes u = h + attn(h) and scales the
// combined residual delta: h' = h + alpha_i * ((u + mlp(u)) - h). With all
// alpha at 1 this is exactly the unscaled stack. alpha == 0 skips the block
// outright so h' == h even when the block output is non-finite.
ForwardTrace forward(const ModelState& m, std::span<const int> tokens,
                     const CaptureFlags& capture = {});

// Copy whose alpha differs only at `block`; tensors shared unchanged.
ModelState with_alpha(const ModelState& m, int block, float value);

}  // namespace bitloupe
