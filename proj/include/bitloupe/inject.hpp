#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bitloupe/model.hpp"
#include "bitloupe/tensor.hpp"

namespace bitloupe {

// Ground-truth descriptor of one injected flip.
struct FaultRecord {
  BitAddress address;
  int block = -1;           // -1 for embed/unembed tensors
  std::string sublayer;     // "attn.q" .. "mlp.down", or "embedding"
  std::uint32_t original_bits = 0;
  std::string injected_at;  // campaign seed tag, never wall-clock

  bool operator==(const FaultRecord&) const = default;
};

struct FaultManifest {
  std::string base_checkpoint_digest;    // model the faults were injected into
  std::string faulty_checkpoint_digest;  // model described by the records
  std::vector<FaultRecord> records;
  std::string selection_policy;
};

enum class PolicyKind { TopMagnitudeMsb, RandomUniform, FixedList };
enum class BitMode { Msb, UniformBit };

struct SelectionPolicy {
  PolicyKind kind = PolicyKind::TopMagnitudeMsb;
  std::uint64_t seed = 0;               // RandomUniform element choice
  BitMode bit_mode = BitMode::Msb;      // RandomUniform only
  std::vector<BitAddress> fixed;        // FixedList
  std::optional<int> block;             // restrict eligibility to one block
  std::optional<std::string> sublayer;  // restrict to one sublayer tag
  // Transformer-block granularity is the diagnosis target, so embedding and
  // unembedding tensors are ineligible unless explicitly requested.
  bool include_embeddings = false;
  // TopMagnitudeMsb: skip the `rank_offset` highest-magnitude sites first,
  // which gives campaigns distinct deterministic sites per trial.
  std::size_t rank_offset = 0;

  std::string tag() const;
};

// The MSB here is the two's-complement sign bit for int8 storage and the top
// exponent bit (30) for float32 storage.
int msb_bit_index(Dtype d);

// Deterministic given (m, policy): ties on |value| break to the lowest
// (tensor name, element index). k must not exceed the eligible site count.
std::vector<BitAddress> select_critical_bits(const ModelState& m, std::size_t k,
                                             const SelectionPolicy& policy);

// Flips every address (validated, pairwise distinct) and returns the
// corrupted model plus the ground-truth manifest.
std::pair<ModelState, FaultManifest> inject(const ModelState& m,
                                            const std::vector<BitAddress>& addresses,
                                            const std::string& injected_at = "",
                                            const std::string& policy_tag = "");

}  // namespace bitloupe
