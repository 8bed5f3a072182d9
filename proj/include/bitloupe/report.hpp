#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bitloupe/diff.hpp"
#include "bitloupe/inject.hpp"
#include "bitloupe/recovery.hpp"
#include "bitloupe/selfref.hpp"

namespace bitloupe {

// All reports are plain structured text with stable key order, so version
// control diffs stay meaningful; checkpoints are the only binary artifacts.
// Numeric values are printed with %.17g and round-trip exactly.

std::string format_sensitivity(const SensitivityReport& r);
SensitivityReport parse_sensitivity(const std::string& text);

std::string format_diffloc(const LocalizationResult& r);
LocalizationResult parse_diffloc(const std::string& text);

std::string format_manifest(const FaultManifest& m);
FaultManifest parse_manifest(const std::string& text);

struct EvalReport {
  std::string checkpoint_digest;
  std::string input_set_id;
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<RecoveryOutcome> recoveries;
};

std::string format_eval(const EvalReport& r);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Tab-separated plot data with a one-line header.
void emit_sensitivity_plots(const SensitivityReport& r,
                            const std::filesystem::path& dir);
void emit_diffloc_plots(const LocalizationResult& r,
                        const std::filesystem::path& dir);
void emit_alpha_sweep_plot(const std::vector<std::pair<double, double>>& curve,
                           const std::filesystem::path& path);

// Offline-inspection dump: one seq_len x d_model matrix file per captured
// block boundary (hidden_0.tsv is the embedded input).
void dump_hidden_states(const ForwardTrace& trace,
                        const std::filesystem::path& dir);

}  // namespace bitloupe
