#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bitloupe/diff.hpp"
#include "bitloupe/inject.hpp"
#include "bitloupe/recovery.hpp"
#include "bitloupe/selfref.hpp"
#include "bitloupe/tasks.hpp"

namespace bitloupe {

struct TrialSpec {
  std::string label;
  SelectionPolicy policy;
  std::size_t k = 1;
  std::string injected_at;  // seed tag recorded in the manifest
};

struct CampaignSpec {
  std::filesystem::path base_checkpoint;
  std::vector<TrialSpec> trials;
  bool run_diff = true;
  bool run_self = false;
  std::filesystem::path output_dir;
  TaskSpec inputs;
  ScalingSet alphas = ScalingSet::default_set();
  DiffOptions diff;
  float attenuation = 0.0f;
  unsigned jobs = 1;  // trial-level parallelism
};

struct TrialOutcome {
  std::string label;
  bool ok = false;
  std::string error;

  int manifest_block = -1;
  std::string manifest_sublayer;

  bool diff_ran = false;
  bool diff_exact = false;  // (block, sublayer, bit addresses) all match
  int diff_block = -1;
  std::string diff_sublayer;
  bool recovery_diff_exact = false;  // restored digest equals the base's

  bool self_ran = false;
  bool self_match = false;
  int self_block = -1;
  double self_bss_ratio = 0.0;
  double recovery_self_pct = 0.0;  // loss form
  bool recovery_self_valid = false;
};

struct CampaignResult {
  std::vector<TrialOutcome> trials;
  int diff_hits = 0;
  int diff_total = 0;
  int self_hits = 0;
  int self_total = 0;
  double mean_recovery_self = 0.0;
  double baseline_loss = 0.0;
  double baseline_accuracy = 0.0;
  std::filesystem::path summary_path;

  bool all_verified() const {
    return diff_hits == diff_total && self_hits == self_total;
  }
};

// For each trial: inject, localize per settings, verify against the
// manifest, recover, evaluate. Trial errors are recorded in the outcome and
// the campaign continues. Re-running an identical spec reproduces
// byte-identical reports.
CampaignResult run_campaign(const CampaignSpec& spec);

}  // namespace bitloupe
