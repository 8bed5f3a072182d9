#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>
#include <set>
#include <tuple>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/cost.hpp"
#include "bitloupe/diff.hpp"
#include "bitloupe/inject.hpp"
#include "support/exhaustive_diff.hpp"
#include "support/fixtures.hpp"

using namespace bitloupe;
using testing::exhaustive_bit_diff;
using testing::fitted_fixture;
using testing::tiny_config;

namespace {

SyntheticTaskSet small_inputs(int vocab) {
  return generate_tasks({TaskKind::ModAdd, 11, 8, 16}, vocab);
}

std::set<std::tuple<std::string, std::size_t, int>> finding_set(
    const LocalizationResult& r) {
  std::set<std::tuple<std::string, std::size_t, int>> s;
  for (const auto& f : r.findings) {
    for (const auto& a : f.addresses()) {
      s.insert({a.tensor_name, a.element_index, a.bit_index});
    }
  }
  return s;
}

std::set<std::tuple<std::string, std::size_t, int>> oracle_set(
    const ModelState& a, const ModelState& b) {
  std::set<std::tuple<std::string, std::size_t, int>> s;
  for (const auto& d : exhaustive_bit_diff(a, b)) {
    s.insert({d.tensor, d.element, d.bit});
  }
  return s;
}

}  // namespace

TEST_CASE("clean vs clean: exact unit similarity and a no-fault outcome") {
  const auto& fx = fitted_fixture();
  const auto X = small_inputs(fx.clean_i8.config.vocab_size);
  auto [block, profile] = localize_block(fx.clean_i8, fx.clean_i8, X);
  CHECK_FALSE(block.has_value());
  for (const auto& d : profile.per_block) {
    CHECK(d.cosine == 1.0);
    CHECK(d.l2 == 0.0);
  }
  const LocalizationResult r = localize_diff(fx.clean_i8, fx.clean_i8, X);
  CHECK_FALSE(r.fault_found);
  CHECK(r.findings.empty());
  CHECK(r.clean_digest == r.faulty_digest);
}

TEST_CASE("single fixture fault: onset at the faulty block, zero upstream") {
  const auto& fx = fitted_fixture();
  const auto X = fx.eval_set;
  const std::string name = block_tensor_name(4, "mlp.up");
  auto [faulty, manifest] = inject(fx.clean_i8, {{name, 1234, 7}});

  auto [block, profile] = localize_block(fx.clean_i8, faulty, X);
  REQUIRE(block.has_value());
  CHECK(*block == 4);
  // upstream blocks are computed from bit-identical parameters: the
  // divergence there is literally zero
  for (int i = 0; i < 4; ++i) {
    CHECK(profile.per_block[i].cosine == 1.0);
    CHECK(profile.per_block[i].l2 == 0.0);
  }
  CHECK(profile.per_block[4].cosine < 1.0);
}

TEST_CASE("activation fingerprinting separates the sublayers") {
  const auto& fx = fitted_fixture();
  const auto X = fx.eval_set;

  auto [mlp_faulty, m1] =
      inject(fx.clean_i8, {{block_tensor_name(3, "mlp.up"), 777, 7}});
  LayerScores s = localize_layer(fx.clean_i8, mlp_faulty, 3, X);
  REQUIRE(s.pick.has_value());
  CHECK(*s.pick == "mlp");
  // the attention path runs before the MLP reads it: bit-identical
  CHECK(s.attn == 1.0);
  CHECK(s.mlp < 1.0);

  auto [attn_faulty, m2] =
      inject(fx.clean_i8, {{block_tensor_name(3, "attn.q"), 99, 7}});
  s = localize_layer(fx.clean_i8, attn_faulty, 3, X);
  REQUIRE(s.pick.has_value());
  CHECK(*s.pick == "attn");
  CHECK(s.attn < s.mlp);

  // clean vs clean: both at exactly 1, no suspect
  s = localize_layer(fx.clean_i8, fx.clean_i8, 3, X);
  CHECK_FALSE(s.pick.has_value());
  CHECK(s.attn == 1.0);
  CHECK(s.mlp == 1.0);
}

TEST_CASE("localize_bits: digests skip clean tensors and XOR the rest") {
  const auto& fx = fitted_fixture();
  CHECK(localize_bits(fx.clean_i8, fx.clean_i8, 2, "mlp").empty());

  auto [faulty, manifest] =
      inject(fx.clean_i8, {{block_tensor_name(2, "mlp.down"), 321, 7}});
  CostLedger ledger;
  const auto findings = localize_bits(fx.clean_i8, faulty, 2, "mlp", &ledger);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].tensor == block_tensor_name(2, "mlp.down"));
  CHECK(findings[0].element == 321);
  CHECK(findings[0].bits == std::vector<int>{7});
  // 2 tensor-pair digests, one tensor scanned element-by-element
  const auto cost = snapshot(ledger);
  CHECK(cost.hash_computations == 2);
  CHECK(cost.element_comparisons ==
        fx.clean_i8.tensor(block_tensor_name(2, "mlp.down")).element_count());
}

TEST_CASE("two flips in one element collapse into one finding") {
  const auto& fx = fitted_fixture();
  const std::string name = block_tensor_name(5, "attn.v");
  auto [once, m1] = inject(fx.clean_i8, {{name, 50, 1}});
  ModelState twice = once;
  twice.tensors[name] =
      std::make_shared<WeightTensor>(flip_bit(*twice.tensors[name], {name, 50, 6}));

  const auto findings = localize_bits(fx.clean_i8, twice, 5, "attn");
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].element == 50);
  CHECK(findings[0].bits == std::vector<int>{1, 6});
  CHECK((findings[0].clean_bits ^ findings[0].faulty_bits) == ((1u << 1) | (1u << 6)));
}

TEST_CASE("localize_diff composes the stages and matches the oracle") {
  const auto& fx = fitted_fixture();
  const auto X = fx.eval_set;
  SelectionPolicy p;
  p.kind = PolicyKind::RandomUniform;
  p.bit_mode = BitMode::Msb;
  p.block = 7;
  p.sublayer = "mlp.down";
  p.seed = 41;
  const auto addr = select_critical_bits(fx.clean_i8, 1, p);
  auto [faulty, manifest] = inject(fx.clean_i8, addr);

  const LocalizationResult r = localize_diff(fx.clean_i8, faulty, X);
  CHECK(r.fault_found);
  CHECK(r.block == 7);
  CHECK(r.sublayer == "mlp.down");
  CHECK(finding_set(r) == oracle_set(fx.clean_i8, faulty));
  CHECK(r.digest_mismatches ==
        std::vector<std::string>{block_tensor_name(7, "mlp.down")});
  // ledger on the mlp path: n_blocks + 2 activations + 3 digest pairs
  // (block pre-check + both mlp tensors) + one full tensor scan
  CHECK(r.cost.hidden_state_comparisons == 8);
  CHECK(r.cost.activation_comparisons == 2);
  CHECK(r.cost.hash_computations == 3);
  const std::size_t scanned =
      fx.clean_i8.tensor(block_tensor_name(7, "mlp.down")).element_count();
  CHECK(r.cost.element_comparisons == scanned);
  // instrumentation ground truth equals the closed-form staged prediction
  CHECK(r.cost.total() == cost_model(8, 6, scanned).staged);
  CHECK(r.forward_passes == 2 * X.items.size());
}

TEST_CASE("a fault multiplied only by zero activations is a no-op") {
  const auto& fx = fitted_fixture();
  // silence mlp channel 5 of block 3 (zero up-row), then corrupt the
  // mlp.down column that reads it: silu(0) is exactly 0, so the flipped
  // weight never contributes
  ModelState clean = fx.clean_i8;
  const std::string up = block_tensor_name(3, "mlp.up");
  const std::string down = block_tensor_name(3, "mlp.down");
  {
    const auto& t = clean.tensor(up);
    std::vector<std::int8_t> vals(t.raw_bytes().size());
    std::memcpy(vals.data(), t.raw_bytes().data(), vals.size());
    const int d_model = clean.config.d_model;
    for (int c = 0; c < d_model; ++c) {
      vals[static_cast<std::size_t>(5) * d_model + c] = 0;
    }
    clean.tensors[up] = std::make_shared<WeightTensor>(WeightTensor::from_int8(
        up, t.shape(), std::move(vals), t.quant_scale()));
  }
  const int d_ff = clean.config.d_ff;
  ModelState faulty = clean;
  faulty.tensors[down] = std::make_shared<WeightTensor>(
      flip_bit(clean.tensor(down), {down, static_cast<std::size_t>(2) * d_ff + 5, 3}));

  CHECK_FALSE(oracle_set(clean, faulty).empty());  // the bits do differ
  const LocalizationResult r = localize_diff(clean, faulty, fx.eval_set);
  CHECK_FALSE(r.fault_found);  // but behavior is untouched
  CHECK(r.findings.empty());
}

TEST_CASE("multi-block mode reports all corrupted blocks") {
  const auto& fx = fitted_fixture();
  auto [faulty, manifest] =
      inject(fx.clean_i8, {{block_tensor_name(2, "attn.v"), 10, 7},
                           {block_tensor_name(6, "mlp.up"), 20, 7}});
  DiffOptions opts;
  opts.multi_block = true;
  const LocalizationResult r = localize_diff(fx.clean_i8, faulty, fx.eval_set, opts);
  CHECK(r.fault_found);
  CHECK(r.block == 2);  // onset
  CHECK(r.blocks == std::vector<int>{2, 6});
  CHECK(finding_set(r) == oracle_set(fx.clean_i8, faulty));
}

TEST_CASE("soundness fuzz: every reported address is a real bit difference") {
  const ModelState m = init_model(tiny_config());
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    SelectionPolicy p;
    p.kind = PolicyKind::RandomUniform;
    p.seed = rng();
    const auto addr = select_critical_bits(m, 1, p);
    auto [faulty, manifest] = inject(m, addr);
    int block = 0;
    std::string sublayer;
    REQUIRE(parse_block_tensor_name(addr[0].tensor_name, block, sublayer));
    const auto findings = localize_bits(m, faulty, block, sublayer);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].addresses() == addr);
  }
}

TEST_CASE("architecture mismatch is rejected") {
  const auto& fx = fitted_fixture();
  const ModelState other = init_model(tiny_config());
  CHECK_THROWS_AS(
      localize_diff(fx.clean_i8, other, small_inputs(fx.clean_i8.config.vocab_size)),
      std::invalid_argument);
}

TEST_CASE("l2 metric and max-deviation mode localize the fixture fault too") {
  const auto& fx = fitted_fixture();
  auto [faulty, manifest] =
      inject(fx.clean_i8, {{block_tensor_name(4, "attn.o"), 64, 7}});
  DiffOptions opts;
  opts.metric = DivMetric::L2;
  opts.pick = BlockPick::MaxDeviation;
  const LocalizationResult r = localize_diff(fx.clean_i8, faulty, fx.eval_set, opts);
  CHECK(r.fault_found);
  // max deviation may land downstream of the source; the profile still
  // pins the onset at block 4 exactly
  for (int i = 0; i < 4; ++i) {
    CHECK(r.profile.per_block[i].l2 == 0.0);
  }
  CHECK(r.profile.per_block[4].l2 > 0.0);
}
