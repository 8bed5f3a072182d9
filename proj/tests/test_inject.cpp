#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/inject.hpp"
#include "bitloupe/metrics.hpp"
#include "support/exhaustive_diff.hpp"
#include "support/fixtures.hpp"

using namespace bitloupe;
using testing::exhaustive_bit_diff;
using testing::fitted_fixture;
using testing::tiny_config;

TEST_CASE("top-magnitude-msb picks the largest weight's sign bit") {
  ModelState m = init_model(tiny_config());
  // hand-crafted int8 tensor [3, -7, 2]: element 1 has the top magnitude
  const std::string name = block_tensor_name(0, "attn.q");
  const auto shape = m.tensor(name).shape();
  std::vector<std::int8_t> vals(shape_element_count(shape), 0);
  vals[0] = 3;
  vals[1] = -7;
  vals[2] = 2;
  m.tensors[name] = std::make_shared<WeightTensor>(
      WeightTensor::from_int8(name, shape, std::move(vals), 1.0f));

  SelectionPolicy p;
  p.kind = PolicyKind::TopMagnitudeMsb;
  p.block = 0;
  p.sublayer = "attn.q";
  const auto picks = select_critical_bits(m, 1, p);
  REQUIRE(picks.size() == 1);
  CHECK(picks[0].tensor_name == name);
  CHECK(picks[0].element_index == 1);
  CHECK(picks[0].bit_index == 7);
}

TEST_CASE("k equal to the eligible count addresses every weight once") {
  ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::TopMagnitudeMsb;
  p.block = 0;
  p.sublayer = "mlp.down";
  const std::size_t count = m.tensor(block_tensor_name(0, "mlp.down")).element_count();
  const auto picks = select_critical_bits(m, count, p);
  std::set<std::size_t> elements;
  for (const auto& a : picks) {
    elements.insert(a.element_index);
  }
  CHECK(elements.size() == count);
  CHECK_THROWS_AS(select_critical_bits(m, count + 1, p), std::invalid_argument);
}

TEST_CASE("fixed-list policy echoes validated addresses") {
  const ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::FixedList;
  p.fixed = {{block_tensor_name(1, "mlp.up"), 5, 12}};
  const auto picks = select_critical_bits(m, 1, p);
  CHECK(picks == p.fixed);

  p.fixed = {{block_tensor_name(1, "mlp.up"), 5, 99}};
  CHECK_THROWS_AS(select_critical_bits(m, 1, p), std::out_of_range);
  p.fixed = {{"no.such.tensor", 0, 0}};
  CHECK_THROWS_AS(select_critical_bits(m, 1, p), std::out_of_range);
}

TEST_CASE("selection is deterministic and embeddings are excluded by default") {
  const ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::TopMagnitudeMsb;
  const auto a = select_critical_bits(m, 20, p);
  const auto b = select_critical_bits(m, 20, p);
  CHECK(a == b);
  for (const auto& addr : a) {
    CHECK(addr.tensor_name.starts_with("block."));
  }
  p.include_embeddings = true;
  bool saw_embedding = false;
  for (const auto& addr : select_critical_bits(m, 400, p)) {
    if (!addr.tensor_name.starts_with("block.")) {
      saw_embedding = true;
    }
  }
  CHECK(saw_embedding);
}

TEST_CASE("random-uniform selection is seed-deterministic and distinct") {
  const ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::RandomUniform;
  p.seed = 7;
  const auto a = select_critical_bits(m, 10, p);
  CHECK(a == select_critical_bits(m, 10, p));
  std::set<BitAddress> uniq(a.begin(), a.end());
  CHECK(uniq.size() == a.size());
  p.seed = 8;
  CHECK(a != select_critical_bits(m, 10, p));
}

TEST_CASE("inject flips exactly the recorded bits") {
  const ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::RandomUniform;
  p.seed = 3;
  const auto addresses = select_critical_bits(m, 5, p);
  auto [faulty, manifest] = inject(m, addresses, "seed:3", p.tag());

  CHECK(manifest.records.size() == 5);
  CHECK(manifest.base_checkpoint_digest == checkpoint_digest_hex(m));
  CHECK(manifest.faulty_checkpoint_digest == checkpoint_digest_hex(faulty));
  CHECK(manifest.selection_policy == p.tag());

  // the brute-force oracle agrees bit for bit
  const auto diffs = exhaustive_bit_diff(m, faulty);
  CHECK(diffs.size() == manifest.records.size());
  std::set<std::tuple<std::string, std::size_t, int>> expect;
  for (const auto& a : addresses) {
    expect.insert({a.tensor_name, a.element_index, a.bit_index});
  }
  for (const auto& d : diffs) {
    CHECK(expect.count({d.tensor, d.element, d.bit}) == 1);
  }

  // record metadata resolves the owning block and sublayer
  for (const auto& rec : manifest.records) {
    CHECK(rec.sublayer != "");
    CHECK(rec.block >= 0);
    CHECK(rec.address.tensor_name ==
          block_tensor_name(rec.block, rec.sublayer));
    CHECK(rec.injected_at == "seed:3");
  }
}

TEST_CASE("re-flipping every recorded address restores the checkpoint") {
  const ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::RandomUniform;
  p.seed = 11;
  const auto addresses = select_critical_bits(m, 3, p);
  auto [faulty, manifest] = inject(m, addresses);
  ModelState restored = faulty;
  for (const auto& rec : manifest.records) {
    restored.tensors[rec.address.tensor_name] = std::make_shared<WeightTensor>(
        flip_bit(restored.tensor(rec.address.tensor_name), rec.address));
  }
  CHECK(checkpoint_digest(restored) == checkpoint_digest(m));
}

TEST_CASE("inject rejects bad address lists") {
  const ModelState m = init_model(tiny_config());
  CHECK_THROWS_AS(inject(m, {}), std::invalid_argument);
  const BitAddress a{block_tensor_name(0, "attn.q"), 1, 2};
  CHECK_THROWS_AS(inject(m, {a, a}), std::invalid_argument);
  CHECK_THROWS_AS(inject(m, {{block_tensor_name(0, "attn.q"), 1u << 20, 2}}),
                  std::out_of_range);
}

TEST_CASE("fixture sign-bit faults produce a measurable loss change") {
  const auto& fx = fitted_fixture();
  // Bounded int8 sign flips shift one weight by 128 quantization steps;
  // at this scale that reliably moves the loss but cannot come near
  // doubling it (see the acceptance suite for the stated 2x check).
  for (int b : {2, 4, 7}) {
    SelectionPolicy p;
    p.kind = PolicyKind::TopMagnitudeMsb;
    p.block = b;
    const auto addr = select_critical_bits(fx.clean_i8, 1, p);
    auto [faulty, manifest] = inject(fx.clean_i8, addr);
    const double corrupted = evaluate(faulty, fx.eval_set).loss;
    CHECK(corrupted != fx.baseline_loss_i8);
    CHECK(std::fabs(corrupted - fx.baseline_loss_i8) > 1e-6);
  }
}

TEST_CASE("selection order is stable under canonical tensor ordering") {
  // same model assembled twice; std::map iteration is name-sorted either way
  const ModelState a = init_model(tiny_config());
  ModelState b;
  b.config = a.config;
  b.alpha = a.alpha;
  for (auto it = a.tensors.rbegin(); it != a.tensors.rend(); ++it) {
    b.tensors.emplace(it->first, it->second);
  }
  SelectionPolicy p;
  p.kind = PolicyKind::TopMagnitudeMsb;
  CHECK(select_critical_bits(a, 25, p) == select_critical_bits(b, 25, p));
}
