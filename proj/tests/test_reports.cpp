#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/diff.hpp"
#include "bitloupe/inject.hpp"
#include "bitloupe/report.hpp"
#include "bitloupe/selfref.hpp"
#include "support/fixtures.hpp"

using namespace bitloupe;
using testing::tiny_config;

namespace {

std::filesystem::path tmp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "bitloupe_report_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("manifest round-trip preserves every record") {
  const ModelState m = init_model(tiny_config());
  SelectionPolicy p;
  p.kind = PolicyKind::RandomUniform;
  p.seed = 9;
  const auto addrs = select_critical_bits(m, 4, p);
  auto [faulty, manifest] = inject(m, addrs, "seed:9", p.tag());

  const std::string text = format_manifest(manifest);
  const FaultManifest back = parse_manifest(text);
  CHECK(back.base_checkpoint_digest == manifest.base_checkpoint_digest);
  CHECK(back.faulty_checkpoint_digest == manifest.faulty_checkpoint_digest);
  CHECK(back.selection_policy == manifest.selection_policy);
  REQUIRE(back.records.size() == manifest.records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    CHECK(back.records[i] == manifest.records[i]);
  }
  // stable bytes
  CHECK(format_manifest(back) == text);
}

TEST_CASE("sensitivity report round-trip and plot data") {
  const ModelState m = init_model(tiny_config());
  const auto X = generate_tasks({TaskKind::Copy, 3, 4, 8}, m.config.vocab_size);
  const SensitivityReport rep = localize_self(m, X, ScalingSet::default_set());
  const std::string text = format_sensitivity(rep);
  const SensitivityReport back = parse_sensitivity(text);
  CHECK(back.base_loss == rep.base_loss);
  CHECK(back.delta_loss == rep.delta_loss);
  CHECK(back.bss == rep.bss);
  CHECK(back.alphas == rep.alphas);
  CHECK(back.suspected_block == rep.suspected_block);
  CHECK(back.checkpoint_digest == rep.checkpoint_digest);
  CHECK(format_sensitivity(back) == text);

  const auto dir = tmp_dir() / "sens";
  emit_sensitivity_plots(rep, dir);
  const std::string heatmap = read_text_file(dir / "delta_loss_heatmap.tsv");
  // header + one row per block; each row has |alphas| values
  std::size_t lines = std::count(heatmap.begin(), heatmap.end(), '\n');
  CHECK(lines == 1 + static_cast<std::size_t>(m.config.n_blocks));
  const std::string bss = read_text_file(dir / "bss_bars.tsv");
  CHECK(std::count(bss.begin(), bss.end(), '\n') ==
        1 + static_cast<std::size_t>(m.config.n_blocks));
  std::filesystem::remove_all(dir);
}

TEST_CASE("localization report round-trip preserves the evidence") {
  const ModelState m = init_model(tiny_config());
  auto [faulty, manifest] =
      inject(m, {{block_tensor_name(1, "attn.v"), 3, 30}});
  const auto X = generate_tasks({TaskKind::Copy, 3, 4, 8}, m.config.vocab_size);
  const LocalizationResult r = localize_diff(m, faulty, X);
  const std::string text = format_diffloc(r);
  const LocalizationResult back = parse_diffloc(text);
  CHECK(back.fault_found == r.fault_found);
  CHECK(back.block == r.block);
  CHECK(back.sublayer == r.sublayer);
  CHECK(back.findings == r.findings);
  CHECK(back.digest_mismatches == r.digest_mismatches);
  CHECK(back.cost == r.cost);
  CHECK(back.clean_digest == r.clean_digest);
  CHECK(format_diffloc(back) == text);

  const auto dir = tmp_dir() / "diff";
  emit_diffloc_plots(r, dir);
  const std::string series = read_text_file(dir / "block_divergence.tsv");
  CHECK(std::count(series.begin(), series.end(), '\n') ==
        1 + static_cast<std::size_t>(m.config.n_blocks));
  std::filesystem::remove_all(dir);
}

TEST_CASE("clean-pair similarity series is the constant 1.0 line") {
  const ModelState m = init_model(tiny_config());
  const auto X = generate_tasks({TaskKind::Copy, 3, 4, 8}, m.config.vocab_size);
  const LocalizationResult r = localize_diff(m, m, X);
  const auto dir = tmp_dir() / "cleanpair";
  emit_diffloc_plots(r, dir);
  std::istringstream in(read_text_file(dir / "block_divergence.tsv"));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream row(line);
    int block;
    double cosine, l2;
    row >> block >> cosine >> l2;
    CHECK(cosine == 1.0);
    CHECK(l2 == 0.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("alpha sweep plot has the exact 17-point grid") {
  std::vector<std::pair<double, double>> curve;
  for (int i = 0; i < 17; ++i) {
    curve.emplace_back((2 + i) / 10.0, 0.1 * i);
  }
  const auto path = tmp_dir() / "sweep.tsv";
  emit_alpha_sweep_plot(curve, path);
  const std::string text = read_text_file(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 18);  // header + 17 rows
  std::filesystem::remove(path);
}

TEST_CASE("eval report formatting is stable") {
  EvalReport r;
  r.checkpoint_digest = "abc";
  r.input_set_id = "task=copy;seed=1;count=2;length=3";
  r.loss = 1.25;
  r.accuracy = 0.5;
  r.recoveries.push_back(make_outcome(RecoveryMode::ResidualZeroing,
                                      MetricDirection::LowerBetter, 1.0, 5.0,
                                      2.0));
  const std::string a = format_eval(r);
  const std::string b = format_eval(r);
  CHECK(a == b);
  CHECK(a.find("percentage=75") != std::string::npos);
  CHECK(a.find("mode=residual-zeroing") != std::string::npos);
}

TEST_CASE("parsers reject malformed input") {
  CHECK_THROWS(parse_manifest("not a manifest\n"));
  CHECK_THROWS(parse_sensitivity("bitloupe-manifest v1\n"));
  CHECK_THROWS(parse_manifest("bitloupe-manifest v1\nbase_checkpoint: x\n"));
}
