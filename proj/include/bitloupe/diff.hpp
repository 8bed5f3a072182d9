#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bitloupe/cost.hpp"
#include "bitloupe/model.hpp"
#include "bitloupe/tasks.hpp"
#include "bitloupe/tensor.hpp"

namespace bitloupe {

enum class DivMetric { Cosine, L2 };
enum class BlockPick {
  // Corruption propagates downstream, so the first block whose deviation
  // clears the noise envelope marks the source even when later blocks
  // deviate more.
  Onset,
  // Plain argmax of deviation, kept as a fallback mode.
  MaxDeviation,
};

const char* div_metric_name(DivMetric m);
DivMetric parse_div_metric(const std::string& s);
const char* block_pick_name(BlockPick p);

struct BlockDivergence {
  double cosine = 1.0;  // clamped to [-1, 1]; exactly 1 for identical states
  double l2 = 0.0;      // mean euclidean distance, exactly 0 for identical
};

struct DivergenceProfile {
  std::vector<BlockDivergence> per_block;  // indexed by block, output side
  DivMetric metric = DivMetric::Cosine;
  std::string aggregation;  // "mean-positions" or "last-token"
};

struct LayerScores {
  double attn = 1.0;
  double mlp = 1.0;
  // "attn" or "mlp"; empty when both sit inside the noise envelope.
  std::optional<std::string> pick;
};

// One differing element: stored bits of both sides plus the exact flipped
// bit indices (several when multiple flips landed in the same element).
struct BitFinding {
  std::string tensor;
  std::size_t element = 0;
  std::vector<int> bits;
  std::uint32_t clean_bits = 0;
  std::uint32_t faulty_bits = 0;

  std::vector<BitAddress> addresses() const;
  bool operator==(const BitFinding&) const = default;
};

struct DiffOptions {
  DivMetric metric = DivMetric::Cosine;
  BlockPick pick = BlockPick::Onset;
  bool last_token_only = false;
  // Deterministic identical computation makes the clean-clean envelope
  // exactly zero, and upstream-of-fault blocks diverge by exactly zero, so
  // the floor only has to separate "genuinely zero" from "anything at all"
  // (relative for cosine, scaled by hidden magnitude for l2).
  double deviation_floor = 1e-9;
  // Experimental: scan every block whose deviation clears the envelope and
  // whose parameters actually differ, instead of the onset block only.
  bool multi_block = false;
};

struct LocalizationResult {
  bool fault_found = false;
  int block = -1;
  std::vector<int> blocks;  // all implicated blocks (multi-block mode)
  // Coarse tag from activation fingerprinting, refined to the exact
  // projection (e.g. "mlp.up") once findings resolve it; consistent with
  // the tensors named in the findings.
  std::string sublayer;
  std::vector<BitFinding> findings;
  DivergenceProfile profile;
  double attn_similarity = 1.0;
  double mlp_similarity = 1.0;
  std::vector<std::string> digest_mismatches;
  // Stage-3 pre-check: behavioral divergence with bitwise-identical block
  // parameters (possible when the corruption lives outside the block).
  bool block_params_match = false;
  CostSnapshot cost;
  std::uint64_t forward_passes = 0;
  std::string clean_digest;
  std::string faulty_digest;
  std::string input_set_id;
  DivMetric metric = DivMetric::Cosine;
  BlockPick pick = BlockPick::Onset;
  std::string aggregation;
};

// Stage 1: per-block hidden-state divergence. Returns the picked block, or
// nullopt when every deviation sits inside the envelope (no-fault).
std::pair<std::optional<int>, DivergenceProfile> localize_block(
    const ModelState& clean, const ModelState& faulty,
    const SyntheticTaskSet& X, const DiffOptions& opts = {},
    CostLedger* ledger = nullptr);

// Stage 2: activation fingerprinting of block B*'s sublayer contributions;
// the sublayer with lower mean cosine similarity is suspect.
LayerScores localize_layer(const ModelState& clean, const ModelState& faulty,
                           int block, const SyntheticTaskSet& X,
                           const DiffOptions& opts = {},
                           CostLedger* ledger = nullptr);

// Stage 3: per-tensor digests over the named sublayer ("attn", "mlp", or a
// specific projection tag); matching digests are skipped, mismatching
// tensors are compared element-wise and flipped bits extracted by XOR.
std::vector<BitFinding> localize_bits(const ModelState& clean,
                                      const ModelState& faulty, int block,
                                      const std::string& sublayer,
                                      CostLedger* ledger = nullptr);

// Composes the three stages with a block-level digest pre-check between
// stages 2 and 3 (one comparison clears or confirms the whole block, and
// redirects the tensor scan when the fingerprint picked the wrong side).
LocalizationResult localize_diff(const ModelState& clean,
                                 const ModelState& faulty,
                                 const SyntheticTaskSet& X,
                                 const DiffOptions& opts = {});

}  // namespace bitloupe
