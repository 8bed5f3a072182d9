#include "bitloupe/diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/kernels.hpp"
#include "bitloupe/parallel.hpp"

namespace bitloupe {

const char* div_metric_name(DivMetric m) {
  return m == DivMetric::Cosine ? "cosine" : "l2";
}

DivMetric parse_div_metric(const std::string& s) {
  if (s == "cosine") return DivMetric::Cosine;
  if (s == "l2") return DivMetric::L2;
  throw std::invalid_argument("unknown divergence metric: " + s);
}

const char* block_pick_name(BlockPick p) {
  return p == BlockPick::Onset ? "onset" : "max";
}

std::vector<BitAddress> BitFinding::addresses() const {
  std::vector<BitAddress> out;
  out.reserve(bits.size());
  for (int b : bits) {
    out.push_back({tensor, element, b});
  }
  return out;
}

namespace {

struct SimAccumulator {
  double cos_sum = 0.0;
  double l2_sum = 0.0;
  double clean_norm_sum = 0.0;
  std::size_t count = 0;

  void add_position(const float* c, const float* f, int n) {
    const auto& k = kern::active();
    const float d2 = k.squared_distance(c, f, static_cast<std::size_t>(n));
    const float sx = k.sum_squares(c, static_cast<std::size_t>(n));
    clean_norm_sum += std::sqrt(static_cast<double>(sx));
    ++count;
    if (d2 == 0.0f) {
      // Bitwise-equal vectors: similarity is exactly 1, distance exactly 0.
      cos_sum += 1.0;
      return;
    }
    const float sy = k.sum_squares(f, static_cast<std::size_t>(n));
    const float dt = k.dot(c, f, static_cast<std::size_t>(n));
    if (!std::isfinite(d2) || !std::isfinite(sy) || !std::isfinite(dt)) {
      // Non-finite activations count as maximal deviation.
      cos_sum += -1.0;
      l2_sum += std::numeric_limits<double>::infinity();
      return;
    }
    double cos;
    if (sx == 0.0f || sy == 0.0f) {
      cos = 0.0;
    } else {
      cos = static_cast<double>(dt) /
            (std::sqrt(static_cast<double>(sx)) * std::sqrt(static_cast<double>(sy)));
      cos = std::clamp(cos, -1.0, 1.0);
    }
    cos_sum += cos;
    l2_sum += std::sqrt(static_cast<double>(d2));
  }

  double mean_cos() const { return count ? cos_sum / static_cast<double>(count) : 1.0; }
  double mean_l2() const { return count ? l2_sum / static_cast<double>(count) : 0.0; }
  double mean_clean_norm() const {
    return count ? clean_norm_sum / static_cast<double>(count) : 0.0;
  }
};

struct TracePair {
  std::vector<ForwardTrace> clean;
  std::vector<ForwardTrace> faulty;
};

TracePair run_pair(const ModelState& clean, const ModelState& faulty,
                   const SyntheticTaskSet& X, const CaptureFlags& capture) {
  if (!(clean.config == faulty.config)) {
    throw std::invalid_argument("architecture mismatch between models");
  }
  if (X.items.empty()) {
    throw std::invalid_argument("input set is empty");
  }
  TracePair t;
  t.clean.resize(X.items.size());
  t.faulty.resize(X.items.size());
  parallel_for(X.items.size() * 2, [&](std::size_t i) {
    const std::size_t item = i / 2;
    const ModelState& m = (i % 2 == 0) ? clean : faulty;
    ForwardTrace& slot = (i % 2 == 0) ? t.clean[item] : t.faulty[item];
    slot = forward(m, X.items[item].tokens, capture);
  });
  return t;
}

// Positions compared per block; aggregation over the probe set is one
// block-level comparison in the cost accounting.
void aggregate_block(const TracePair& traces, int block_output_index,
                     bool last_token_only, SimAccumulator& acc) {
  for (std::size_t i = 0; i < traces.clean.size(); ++i) {
    const Matrix& c = traces.clean[i].hidden[static_cast<std::size_t>(block_output_index)];
    const Matrix& f = traces.faulty[i].hidden[static_cast<std::size_t>(block_output_index)];
    const int first = last_token_only ? c.rows - 1 : 0;
    for (int t = first; t < c.rows; ++t) {
      acc.add_position(c.row(t), f.row(t), c.cols);
    }
  }
}

double deviation_of(const BlockDivergence& d, DivMetric metric) {
  return metric == DivMetric::Cosine ? 1.0 - d.cosine : d.l2;
}

struct Stage1Output {
  std::optional<int> block;
  DivergenceProfile profile;
  std::vector<int> above_envelope;
};

Stage1Output stage1(const TracePair& traces, const ModelConfig& cfg,
                    const DiffOptions& opts, CostLedger* ledger) {
  Stage1Output out;
  out.profile.metric = opts.metric;
  out.profile.aggregation = opts.last_token_only ? "last-token" : "mean-positions";
  out.profile.per_block.resize(static_cast<std::size_t>(cfg.n_blocks));

  double norm_scale = 0.0;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    SimAccumulator acc;
    aggregate_block(traces, b + 1, opts.last_token_only, acc);
    out.profile.per_block[static_cast<std::size_t>(b)] = {acc.mean_cos(),
                                                          acc.mean_l2()};
    norm_scale += acc.mean_clean_norm();
    if (ledger) {
      ledger->hidden_state_comparisons.fetch_add(1);
    }
  }
  norm_scale /= static_cast<double>(cfg.n_blocks);

  // Identical models diverge by exactly zero, so the envelope reduces to a
  // floor: absolute for cosine deviation, magnitude-scaled for l2.
  const double floor = opts.metric == DivMetric::Cosine
                           ? opts.deviation_floor
                           : opts.deviation_floor * norm_scale;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const double dev =
        deviation_of(out.profile.per_block[static_cast<std::size_t>(b)], opts.metric);
    if (dev > floor) {
      out.above_envelope.push_back(b);
    }
  }
  if (out.above_envelope.empty()) {
    return out;
  }
  if (opts.pick == BlockPick::Onset) {
    out.block = out.above_envelope.front();
  } else {
    int best = out.above_envelope.front();
    for (int b : out.above_envelope) {
      if (deviation_of(out.profile.per_block[static_cast<std::size_t>(b)], opts.metric) >
          deviation_of(out.profile.per_block[static_cast<std::size_t>(best)], opts.metric)) {
        best = b;
      }
    }
    out.block = best;
  }
  return out;
}

LayerScores stage2(const TracePair& traces, int block, const DiffOptions& opts,
                   CostLedger* ledger) {
  SimAccumulator attn, mlp;
  for (std::size_t i = 0; i < traces.clean.size(); ++i) {
    const Matrix& ca = traces.clean[i].attn_out[static_cast<std::size_t>(block)];
    const Matrix& fa = traces.faulty[i].attn_out[static_cast<std::size_t>(block)];
    const Matrix& cm = traces.clean[i].mlp_out[static_cast<std::size_t>(block)];
    const Matrix& fm = traces.faulty[i].mlp_out[static_cast<std::size_t>(block)];
    const int first = opts.last_token_only ? ca.rows - 1 : 0;
    for (int t = first; t < ca.rows; ++t) {
      attn.add_position(ca.row(t), fa.row(t), ca.cols);
      mlp.add_position(cm.row(t), fm.row(t), cm.cols);
    }
  }
  if (ledger) {
    ledger->activation_comparisons.fetch_add(2);
  }
  LayerScores s;
  s.attn = attn.mean_cos();
  s.mlp = mlp.mean_cos();
  const double floor = 1.0 - opts.deviation_floor;
  if (s.attn >= floor && s.mlp >= floor) {
    return s;  // both inside the envelope: no suspect
  }
  // The attention output feeds the MLP inside the block, so on an exact tie
  // the upstream sublayer is the suspect.
  s.pick = s.attn <= s.mlp ? "attn" : "mlp";
  return s;
}

std::vector<std::string> sublayer_tensor_names(int block, const std::string& tag) {
  std::vector<std::string> names;
  if (tag == "embedding") {
    return {"embed.tok", "unembed"};
  }
  if (tag == "attn") {
    names = {"attn.k", "attn.o", "attn.q", "attn.v"};
  } else if (tag == "mlp") {
    names = {"mlp.down", "mlp.up"};
  } else {
    const bool known =
        std::find_if(std::begin(kSublayerTags), std::end(kSublayerTags),
                     [&](const char* t) { return tag == t; }) !=
        std::end(kSublayerTags);
    if (!known) {
      throw std::invalid_argument("unknown sublayer tag: " + tag);
    }
    names = {tag};
  }
  for (auto& n : names) {
    n = block_tensor_name(block, n);
  }
  return names;
}

bool bit_comparable(const WeightTensor& a, const WeightTensor& b) {
  return a.dtype() == b.dtype() && a.shape() == b.shape();
}

// Digest of all tensors in one block, both sublayers; one region pair in the
// cost accounting.
std::array<std::uint8_t, 32> block_digest(const ModelState& m, int block) {
  std::vector<std::uint8_t> buf;
  for (const char* tag : kSublayerTags) {
    const TensorDigest d = digest_tensor(m.tensor(block_tensor_name(block, tag)));
    buf.insert(buf.end(), d.digest.begin(), d.digest.end());
  }
  return sha256(buf);
}

}  // namespace

std::pair<std::optional<int>, DivergenceProfile> localize_block(
    const ModelState& clean, const ModelState& faulty,
    const SyntheticTaskSet& X, const DiffOptions& opts, CostLedger* ledger) {
  const TracePair traces = run_pair(clean, faulty, X, {.hidden_states = true});
  Stage1Output s = stage1(traces, clean.config, opts, ledger);
  return {s.block, std::move(s.profile)};
}

LayerScores localize_layer(const ModelState& clean, const ModelState& faulty,
                           int block, const SyntheticTaskSet& X,
                           const DiffOptions& opts, CostLedger* ledger) {
  if (block < 0 || block >= clean.config.n_blocks) {
    throw std::out_of_range("block index out of range");
  }
  const TracePair traces = run_pair(clean, faulty, X, {.sublayers = true});
  return stage2(traces, block, opts, ledger);
}

std::vector<BitFinding> localize_bits(const ModelState& clean,
                                      const ModelState& faulty, int block,
                                      const std::string& sublayer,
                                      CostLedger* ledger) {
  std::vector<BitFinding> findings;
  for (const auto& name : sublayer_tensor_names(block, sublayer)) {
    const WeightTensor& c = clean.tensor(name);
    const WeightTensor& f = faulty.tensor(name);
    if (!bit_comparable(c, f)) {
      throw std::invalid_argument("tensor " + name +
                                  " differs in dtype/shape between models");
    }
    if (ledger) {
      ledger->hash_computations.fetch_add(1);
    }
    if (digest_tensor(c).same_content(digest_tensor(f))) {
      continue;  // guaranteed bit-identical, skip the scan
    }
    const std::size_t count = c.element_count();
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t cb = c.element_bits(i);
      const std::uint32_t fb = f.element_bits(i);
      if (cb != fb) {
        BitFinding finding{name, i, {}, cb, fb};
        std::uint32_t x = cb ^ fb;
        for (int bit = 0; bit < bits_per_element(c.dtype()); ++bit) {
          if (x & (1u << bit)) {
            finding.bits.push_back(bit);
          }
        }
        findings.push_back(std::move(finding));
      }
    }
    if (ledger) {
      ledger->element_comparisons.fetch_add(count);
    }
  }
  return findings;
}

LocalizationResult localize_diff(const ModelState& clean,
                                 const ModelState& faulty,
                                 const SyntheticTaskSet& X,
                                 const DiffOptions& opts) {
  LocalizationResult r;
  r.clean_digest = checkpoint_digest_hex(clean);
  r.faulty_digest = checkpoint_digest_hex(faulty);
  r.input_set_id = X.id();
  r.metric = opts.metric;
  r.pick = opts.pick;
  r.aggregation = opts.last_token_only ? "last-token" : "mean-positions";

  CostLedger ledger;
  const TracePair traces =
      run_pair(clean, faulty, X, {.hidden_states = true, .sublayers = true});
  r.forward_passes = 2 * static_cast<std::uint64_t>(X.items.size());

  Stage1Output s1 = stage1(traces, clean.config, opts, &ledger);
  r.profile = std::move(s1.profile);
  if (!s1.block) {
    r.cost = snapshot(ledger);
    return r;  // no-fault outcome
  }
  r.fault_found = true;
  r.block = *s1.block;

  const LayerScores s2 = stage2(traces, r.block, opts, &ledger);
  r.attn_similarity = s2.attn;
  r.mlp_similarity = s2.mlp;
  const std::string coarse = s2.pick.value_or("");

  std::vector<int> candidates = {r.block};
  if (opts.multi_block) {
    for (int b : s1.above_envelope) {
      if (b != r.block) {
        candidates.push_back(b);
      }
    }
  }

  for (int b : candidates) {
    ledger.hash_computations.fetch_add(1);
    const bool params_match = block_digest(clean, b) == block_digest(faulty, b);
    if (params_match) {
      if (b == r.block) {
        r.block_params_match = true;
      }
      continue;
    }
    if (b != r.block) {
      r.blocks.push_back(b);
    }
    std::vector<std::string> order;
    if (coarse == "attn") {
      order = {"attn", "mlp"};
    } else if (coarse == "mlp") {
      order = {"mlp", "attn"};
    } else {
      order = {"attn", "mlp"};
    }
    std::vector<BitFinding> found =
        localize_bits(clean, faulty, b, order[0], &ledger);
    if (found.empty()) {
      // The fingerprint picked the clean side; the block digest proves the
      // difference is in the sibling.
      found = localize_bits(clean, faulty, b, order[1], &ledger);
    }
    for (auto& f : found) {
      r.findings.push_back(std::move(f));
    }
  }
  r.blocks.insert(r.blocks.begin(), r.block);
  std::sort(r.blocks.begin(), r.blocks.end());
  std::sort(r.findings.begin(), r.findings.end(), [](const auto& a, const auto& b) {
    return std::tie(a.tensor, a.element) < std::tie(b.tensor, b.element);
  });

  for (const auto& f : r.findings) {
    if (std::find(r.digest_mismatches.begin(), r.digest_mismatches.end(),
                  f.tensor) == r.digest_mismatches.end()) {
      r.digest_mismatches.push_back(f.tensor);
    }
  }

  // Refine the sublayer tag from the findings in the primary block; fall
  // back to the fingerprint answer when the scan produced nothing.
  std::vector<std::string> tags;
  for (const auto& f : r.findings) {
    int b = 0;
    std::string tag;
    if (parse_block_tensor_name(f.tensor, b, tag) && b == r.block &&
        std::find(tags.begin(), tags.end(), tag) == tags.end()) {
      tags.push_back(tag);
    }
  }
  if (tags.empty()) {
    r.sublayer = coarse;
  } else {
    std::sort(tags.begin(), tags.end());
    r.sublayer = tags[0];
    for (std::size_t i = 1; i < tags.size(); ++i) {
      r.sublayer += "+" + tags[i];
    }
  }

  r.cost = snapshot(ledger);
  return r;
}

}  // namespace bitloupe
