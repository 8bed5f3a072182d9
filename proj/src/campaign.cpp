#include "bitloupe/campaign.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/metrics.hpp"
#include "bitloupe/parallel.hpp"
#include "bitloupe/report.hpp"

namespace bitloupe {

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::set<BitAddress> manifest_addresses(const FaultManifest& m) {
  std::set<BitAddress> s;
  for (const auto& rec : m.records) {
    s.insert(rec.address);
  }
  return s;
}

std::set<BitAddress> finding_addresses(const LocalizationResult& r) {
  std::set<BitAddress> s;
  for (const auto& f : r.findings) {
    for (const auto& a : f.addresses()) {
      s.insert(a);
    }
  }
  return s;
}

}  // namespace

CampaignResult run_campaign(const CampaignSpec& spec) {
  if (spec.trials.empty()) {
    throw std::invalid_argument("campaign has no trials");
  }
  if (!spec.run_diff && !spec.run_self) {
    throw std::invalid_argument("campaign must run at least one setting");
  }
  std::filesystem::create_directories(spec.output_dir);

  const ModelState base = load_checkpoint(spec.base_checkpoint);
  const SyntheticTaskSet X = generate_tasks(spec.inputs, base.config.vocab_size);
  const EvalResult baseline = evaluate(base, X);

  CampaignResult result;
  result.baseline_loss = baseline.loss;
  result.baseline_accuracy = baseline.accuracy;
  result.trials.resize(spec.trials.size());

  parallel_for(
      spec.trials.size(),
      [&](std::size_t i) {
        const TrialSpec& trial = spec.trials[i];
        TrialOutcome& out = result.trials[i];
        out.label = trial.label;
        const auto dir = spec.output_dir / trial.label;
        std::filesystem::create_directories(dir);
        try {
          const auto addresses = select_critical_bits(base, trial.k, trial.policy);
          auto [faulty, manifest] =
              inject(base, addresses, trial.injected_at, trial.policy.tag());
          save_checkpoint(faulty, dir / "faulty.ckpt");
          write_text_file(dir / "manifest.txt", format_manifest(manifest));
          out.manifest_block = manifest.records.front().block;
          out.manifest_sublayer = manifest.records.front().sublayer;

          const EvalResult corrupted = evaluate(faulty, X);
          EvalReport eval_report;
          eval_report.checkpoint_digest = manifest.faulty_checkpoint_digest;
          eval_report.input_set_id = X.id();
          eval_report.loss = corrupted.loss;
          eval_report.accuracy = corrupted.accuracy;

          if (spec.run_diff) {
            out.diff_ran = true;
            const LocalizationResult loc = localize_diff(base, faulty, X, spec.diff);
            write_text_file(dir / "diffloc.txt", format_diffloc(loc));
            out.diff_block = loc.block;
            out.diff_sublayer = loc.sublayer;
            const bool block_ok =
                loc.fault_found && loc.block == out.manifest_block;
            const bool sublayer_ok = loc.sublayer == out.manifest_sublayer;
            const bool bits_ok =
                finding_addresses(loc) == manifest_addresses(manifest);
            out.diff_exact = block_ok && sublayer_ok && bits_ok;
            if (!loc.findings.empty()) {
              const ModelState restored = recover_diff(faulty, base, loc);
              save_checkpoint(restored, dir / "recovered_diff.ckpt");
              out.recovery_diff_exact =
                  checkpoint_digest(restored) == checkpoint_digest(base);
              const EvalResult rec = evaluate(restored, X);
              eval_report.recoveries.push_back(
                  make_outcome(RecoveryMode::TensorRestoration,
                               MetricDirection::LowerBetter, baseline.loss,
                               corrupted.loss, rec.loss));
            }
          }

          if (spec.run_self) {
            out.self_ran = true;
            const SensitivityReport sens = localize_self(faulty, X, spec.alphas);
            write_text_file(dir / "sensitivity.txt", format_sensitivity(sens));
            out.self_block = sens.suspected_block;
            out.self_bss_ratio = sens.bss_max_over_median;
            out.self_match = sens.suspected_block == out.manifest_block;
            const ModelState mitigated =
                recover_self(faulty, sens.suspected_block, spec.attenuation);
            save_checkpoint(mitigated, dir / "recovered_self.ckpt");
            const EvalResult rec = evaluate(mitigated, X);
            if (baseline.loss != corrupted.loss) {
              out.recovery_self_pct =
                  compute_recovery(baseline.loss, corrupted.loss, rec.loss,
                                   MetricDirection::LowerBetter);
              out.recovery_self_valid = true;
              eval_report.recoveries.push_back(make_outcome(
                  spec.attenuation == 0.0f ? RecoveryMode::ResidualZeroing
                                           : RecoveryMode::ResidualAttenuation,
                  MetricDirection::LowerBetter, baseline.loss, corrupted.loss,
                  rec.loss));
            }
          }

          write_text_file(dir / "eval.txt", format_eval(eval_report));
          out.ok = true;
        } catch (const std::exception& e) {
          out.ok = false;
          out.error = e.what();
        }
      },
      spec.jobs);

  double recovery_sum = 0.0;
  int recovery_n = 0;
  for (const auto& t : result.trials) {
    if (t.diff_ran) {
      ++result.diff_total;
      result.diff_hits += t.diff_exact ? 1 : 0;
    }
    if (t.self_ran) {
      ++result.self_total;
      result.self_hits += t.self_match ? 1 : 0;
    }
    if (t.recovery_self_valid) {
      recovery_sum += t.recovery_self_pct;
      ++recovery_n;
    }
  }
  result.mean_recovery_self = recovery_n ? recovery_sum / recovery_n : 0.0;

  std::ostringstream os;
  os << "bitloupe-campaign v1\n";
  os << "base_checkpoint: " << checkpoint_digest_hex(base) << "\n";
  os << "inputs: " << X.id() << "\n";
  os << "trials: " << spec.trials.size() << "\n";
  os << "settings: " << (spec.run_diff ? "diff" : "")
     << (spec.run_diff && spec.run_self ? "+" : "")
     << (spec.run_self ? "self" : "") << "\n";
  os << "baseline_loss: " << fmt2(result.baseline_loss) << "\n";
  if (spec.run_diff) {
    os << "diff_hits: " << result.diff_hits << "/" << result.diff_total << "\n";
  }
  if (spec.run_self) {
    os << "self_hits: " << result.self_hits << "/" << result.self_total << "\n";
    os << "mean_recovery_self: " << fmt2(result.mean_recovery_self) << "\n";
  }
  for (const auto& t : result.trials) {
    os << "trial " << t.label << ": ";
    if (!t.ok) {
      os << "error=" << t.error << "\n";
      continue;
    }
    os << "manifest=" << t.manifest_block << "/" << t.manifest_sublayer;
    if (t.diff_ran) {
      os << " diff=" << (t.diff_exact ? "exact" : "mismatch")
         << " restored=" << (t.recovery_diff_exact ? "bitwise" : "no");
    }
    if (t.self_ran) {
      os << " self=" << (t.self_match ? "match" : "mismatch")
         << " recovery=" << fmt2(t.recovery_self_pct) << "%";
    }
    os << "\n";
  }
  result.summary_path = spec.output_dir / "summary.txt";
  write_text_file(result.summary_path, os.str());
  return result;
}

}  // namespace bitloupe
