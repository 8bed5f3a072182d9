// bitloupe: inject bit-flip faults into transformer checkpoints, localize
// them with or without a clean reference, and apply inference-time or
// restoration-based recovery.
//
// Exit codes: 0 success, 1 usage/runtime error, 2 no fault detected,
// 3 campaign verification mismatch.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bitloupe/campaign.hpp"
#include "bitloupe/checkpoint.hpp"
#include "bitloupe/cost.hpp"
#include "bitloupe/diff.hpp"
#include "bitloupe/fit.hpp"
#include "bitloupe/inject.hpp"
#include "bitloupe/kernels.hpp"
#include "bitloupe/metrics.hpp"
#include "bitloupe/recovery.hpp"
#include "bitloupe/report.hpp"
#include "bitloupe/selfref.hpp"
#include "bitloupe/tasks.hpp"

namespace {

using namespace bitloupe;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoFault = 2;
constexpr int kExitMismatch = 3;

std::filesystem::path default_out_dir() {
  const char* env = std::getenv("BITLOUPE_OUT");
  return env ? std::filesystem::path(env) : std::filesystem::current_path();
}

std::vector<double> parse_alpha_csv(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stod(tok));
  }
  return out;
}

TaskSpec task_spec_from(const std::string& inputs) {
  // Accepts a full task id ("task=copy;seed=17;count=64;length=32"), a bare
  // or prefixed seed ("17", "seed:17") for the default copy task, or a path
  // to a file whose first line is a task id.
  if (std::filesystem::exists(inputs) &&
      std::filesystem::is_regular_file(inputs)) {
    std::ifstream f(inputs);
    std::string line;
    std::getline(f, line);
    return parse_task_spec(line);
  }
  if (inputs.find('=') != std::string::npos) {
    return parse_task_spec(inputs);
  }
  TaskSpec spec;
  spec.seed = std::stoull(inputs.starts_with("seed:") ? inputs.substr(5) : inputs);
  return spec;
}

SelectionPolicy policy_from(const std::string& name, std::uint64_t seed,
                            int block, const std::string& sublayer,
                            bool include_embeddings, std::size_t rank,
                            const std::string& fixed_address) {
  SelectionPolicy p;
  if (name == "top-magnitude-msb") {
    p.kind = PolicyKind::TopMagnitudeMsb;
  } else if (name == "random-uniform") {
    p.kind = PolicyKind::RandomUniform;
  } else if (name == "random-uniform-msb") {
    p.kind = PolicyKind::RandomUniform;
    p.bit_mode = BitMode::Msb;
  } else if (name == "fixed-list") {
    p.kind = PolicyKind::FixedList;
  } else {
    throw CLI::ValidationError("--policy", "unknown policy " + name);
  }
  if (name == "random-uniform") {
    p.bit_mode = BitMode::UniformBit;
  }
  p.seed = seed;
  if (block >= 0) {
    p.block = block;
  }
  if (!sublayer.empty()) {
    p.sublayer = sublayer;
  }
  p.include_embeddings = include_embeddings;
  p.rank_offset = rank;
  if (p.kind == PolicyKind::FixedList) {
    if (fixed_address.empty()) {
      throw CLI::ValidationError("--address", "fixed-list needs --address");
    }
    // tensor:element:bit
    std::stringstream ss(fixed_address);
    std::string tensor, element, bit;
    std::getline(ss, tensor, ':');
    std::getline(ss, element, ':');
    std::getline(ss, bit, ':');
    p.fixed.push_back({tensor, std::stoull(element), std::stoi(bit)});
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bit-flip fault injection, localization and recovery toolkit"};
  app.require_subcommand(1);

  try {
    // ---------------------------------------------------------------- init
    auto* init = app.add_subcommand("init-model",
                                    "create a deterministic checkpoint, "
                                    "optionally fitted on the synthetic task");
    struct {
      int n_blocks = 8, d_model = 64, n_heads = 4, d_ff = 256, vocab = 256,
          max_seq = 64;
      std::uint64_t seed = 2024;
      std::string out;
      bool fit = false;
      std::string fit_task = "task=copy;seed=11;count=256;length=32";
      int fit_steps = 400, fit_batch = 16;
      double fit_lr = 2.5e-3;
      bool fit_jitter = false;
      double jitter_lo = 0.5, jitter_hi = 1.5, drop_prob = 0.1;
      bool quantize_weights = false;
      bool verbose = false;
    } init_opt;
    init->add_option("--blocks", init_opt.n_blocks);
    init->add_option("--d-model", init_opt.d_model);
    init->add_option("--heads", init_opt.n_heads);
    init->add_option("--d-ff", init_opt.d_ff);
    init->add_option("--vocab", init_opt.vocab);
    init->add_option("--max-seq", init_opt.max_seq);
    init->add_option("--seed", init_opt.seed);
    init->add_option("--out", init_opt.out)->required();
    init->add_flag("--fit", init_opt.fit);
    init->add_option("--fit-task", init_opt.fit_task);
    init->add_option("--fit-steps", init_opt.fit_steps);
    init->add_option("--fit-batch", init_opt.fit_batch);
    init->add_option("--fit-lr", init_opt.fit_lr);
    init->add_flag("--fit-jitter", init_opt.fit_jitter);
    init->add_option("--jitter-lo", init_opt.jitter_lo);
    init->add_option("--jitter-hi", init_opt.jitter_hi);
    init->add_option("--drop-prob", init_opt.drop_prob);
    init->add_flag("--quantize", init_opt.quantize_weights);
    init->add_flag("-v,--verbose", init_opt.verbose);

    // -------------------------------------------------------------- inject
    auto* inject_cmd =
        app.add_subcommand("inject", "select critical bits and flip them");
    struct {
      std::string checkpoint;
      std::string policy = "top-magnitude-msb";
      std::size_t k = 1;
      std::uint64_t seed = 0;
      int block = -1;
      std::string sublayer;
      bool embeddings = false;
      std::size_t rank = 0;
      std::string address;
      std::string out_dir;
      std::string tag;
    } inj;
    inject_cmd->add_option("--checkpoint", inj.checkpoint)->required();
    inject_cmd->add_option("--policy", inj.policy);
    inject_cmd->add_option("--k", inj.k);
    inject_cmd->add_option("--seed", inj.seed);
    inject_cmd->add_option("--block", inj.block);
    inject_cmd->add_option("--sublayer", inj.sublayer);
    inject_cmd->add_flag("--embeddings", inj.embeddings);
    inject_cmd->add_option("--rank", inj.rank);
    inject_cmd->add_option("--address", inj.address);
    inject_cmd->add_option("--out", inj.out_dir);
    inject_cmd->add_option("--tag", inj.tag);

    // ------------------------------------------------------- localize-self
    auto* self_cmd = app.add_subcommand(
        "localize-self", "find the faulty block from the corrupted model alone");
    struct {
      std::string checkpoint;
      std::string alphas = "0.6,0.7,0.8,0.9,1.1,1.2,1.3,1.4";
      std::string inputs = "17";
      std::string report;
    } self_opt;
    self_cmd->add_option("--checkpoint", self_opt.checkpoint)->required();
    self_cmd->add_option("--alphas", self_opt.alphas);
    self_cmd->add_option("--inputs", self_opt.inputs);
    self_cmd->add_option("--report", self_opt.report);

    // ------------------------------------------------------- localize-diff
    auto* diff_cmd = app.add_subcommand(
        "localize-diff", "three-stage localization against a clean reference");
    struct {
      std::string clean, faulty;
      std::string inputs = "17";
      std::string metric = "cosine";
      std::string pick = "onset";
      bool last_token = false;
      bool multi_block = false;
      std::string report;
    } diff_opt;
    diff_cmd->add_option("--clean", diff_opt.clean)->required();
    diff_cmd->add_option("--faulty", diff_opt.faulty)->required();
    diff_cmd->add_option("--inputs", diff_opt.inputs);
    diff_cmd->add_option("--metric", diff_opt.metric);
    diff_cmd->add_option("--pick", diff_opt.pick);
    diff_cmd->add_flag("--last-token", diff_opt.last_token);
    diff_cmd->add_flag("--multi-block", diff_opt.multi_block);
    diff_cmd->add_option("--report", diff_opt.report);

    // ------------------------------------------------------------- recover
    auto* recover_cmd = app.add_subcommand("recover", "mitigate or restore");
    struct {
      std::string mode = "self";
      std::string faulty, clean, out;
      int block = -1;
      double attenuation = 0.0;
      bool sweep = false;
      std::string inputs = "17";
      bool element_patch = false;
    } rec;
    recover_cmd->add_option("--mode", rec.mode);
    recover_cmd->add_option("--faulty", rec.faulty)->required();
    recover_cmd->add_option("--clean", rec.clean);
    recover_cmd->add_option("--block", rec.block);
    recover_cmd->add_option("--attenuation", rec.attenuation);
    recover_cmd->add_flag("--sweep", rec.sweep);
    recover_cmd->add_option("--inputs", rec.inputs);
    recover_cmd->add_flag("--element-patch", rec.element_patch);
    recover_cmd->add_option("--out", rec.out)->required();

    // ---------------------------------------------------------------- eval
    auto* eval_cmd = app.add_subcommand("eval", "loss/accuracy on the synthetic task");
    struct {
      std::string checkpoint;
      std::string tasks = "17";
      std::string report;
    } ev;
    eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
    eval_cmd->add_option("--tasks", ev.tasks);
    eval_cmd->add_option("--report", ev.report);

    // ------------------------------------------------------------ costmodel
    auto* cost_cmd = app.add_subcommand("costmodel",
                                        "staged vs brute-force comparison counts");
    struct {
      std::uint64_t blocks = 16, tensors = 7, elems = 16777216;
    } cm;
    cost_cmd->add_option("--blocks", cm.blocks);
    cost_cmd->add_option("--tensors", cm.tensors);
    cost_cmd->add_option("--elems", cm.elems);

    // ------------------------------------------------------------- campaign
    auto* camp_cmd = app.add_subcommand("campaign", "orchestrate a trial grid");
    struct {
      std::string checkpoint;
      std::string blocks = "2,4,7";
      std::string sublayers = "attn.q,attn.k,attn.v,mlp.up,mlp.down";
      std::string seeds = "101,202";
      std::string settings = "diff";
      std::string policy = "random-uniform-msb";
      std::string inputs = "17";
      std::string alphas = "0.6,0.7,0.8,0.9,1.1,1.2,1.3,1.4";
      double attenuation = 0.0;
      std::string out_dir;
      unsigned jobs = 1;
    } camp;
    camp_cmd->add_option("--checkpoint", camp.checkpoint)->required();
    camp_cmd->add_option("--blocks", camp.blocks);
    camp_cmd->add_option("--sublayers", camp.sublayers);
    camp_cmd->add_option("--seeds", camp.seeds);
    camp_cmd->add_option("--settings", camp.settings);
    camp_cmd->add_option("--policy", camp.policy);
    camp_cmd->add_option("--inputs", camp.inputs);
    camp_cmd->add_option("--alphas", camp.alphas);
    camp_cmd->add_option("--attenuation", camp.attenuation);
    camp_cmd->add_option("--out", camp.out_dir);
    camp_cmd->add_option("--jobs", camp.jobs);

    // ----------------------------------------------------------- emit-plots
    auto* plots_cmd = app.add_subcommand("emit-plots",
                                         "write plot-ready TSV data from a report");
    struct {
      std::string report;
      std::string out_dir;
    } pl;
    plots_cmd->add_option("--report", pl.report)->required();
    plots_cmd->add_option("--out", pl.out_dir);

    // ---------------------------------------------------------------- trace
    auto* trace_cmd = app.add_subcommand(
        "trace", "dump per-block hidden states for one input sequence");
    struct {
      std::string checkpoint;
      std::string inputs = "17";
      int item = 0;
      std::string out_dir;
    } tr;
    trace_cmd->add_option("--checkpoint", tr.checkpoint)->required();
    trace_cmd->add_option("--inputs", tr.inputs);
    trace_cmd->add_option("--item", tr.item);
    trace_cmd->add_option("--out", tr.out_dir)->required();

    // ---------------------------------------------------------- alpha-sweep
    auto* sweep_cmd = app.add_subcommand(
        "alpha-sweep", "dense delta-loss curve for one block");
    struct {
      std::string checkpoint;
      int block = 0;
      double lo = 0.2, hi = 1.8, step = 0.1;
      std::string inputs = "17";
      std::string out;
    } sw;
    sweep_cmd->add_option("--checkpoint", sw.checkpoint)->required();
    sweep_cmd->add_option("--block", sw.block);
    sweep_cmd->add_option("--lo", sw.lo);
    sweep_cmd->add_option("--hi", sw.hi);
    sweep_cmd->add_option("--step", sw.step);
    sweep_cmd->add_option("--inputs", sw.inputs);
    sweep_cmd->add_option("--out", sw.out)->required();

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kExitOk : kExitUsage;
    }

    if (init->parsed()) {
      ModelConfig cfg{init_opt.n_blocks, init_opt.d_model, init_opt.n_heads,
                      init_opt.d_ff,     init_opt.vocab,   init_opt.max_seq,
                      init_opt.seed};
      ModelState m = init_model(cfg);
      if (init_opt.fit) {
        FitOptions fo;
        fo.data = parse_task_spec(init_opt.fit_task);
        fo.steps = init_opt.fit_steps;
        fo.batch = init_opt.fit_batch;
        fo.lr = static_cast<float>(init_opt.fit_lr);
        fo.scale_jitter = init_opt.fit_jitter;
        fo.jitter_lo = static_cast<float>(init_opt.jitter_lo);
        fo.jitter_hi = static_cast<float>(init_opt.jitter_hi);
        fo.drop_prob = static_cast<float>(init_opt.drop_prob);
        if (init_opt.verbose) {
          fo.on_step = [](int step, double loss) {
            if (step % 25 == 0) {
              std::fprintf(stderr, "step %4d loss %.4f\n", step, loss);
            }
          };
        }
        m = fit_model(m, fo);
      }
      if (init_opt.quantize_weights) {
        for (auto& [name, tensor] : m.tensors) {
          tensor = std::make_shared<WeightTensor>(quantize(*tensor));
        }
      }
      save_checkpoint(m, init_opt.out);
      std::cout << "checkpoint: " << init_opt.out << "\n"
                << "digest: " << checkpoint_digest_hex(m) << "\n"
                << "kernels: " << kern::active_name() << "\n";
      return kExitOk;
    }

    if (inject_cmd->parsed()) {
      const ModelState m = load_checkpoint(inj.checkpoint);
      const SelectionPolicy policy =
          policy_from(inj.policy, inj.seed, inj.block, inj.sublayer,
                      inj.embeddings, inj.rank, inj.address);
      const auto addresses = select_critical_bits(m, inj.k, policy);
      const std::string tag =
          inj.tag.empty() ? "seed:" + std::to_string(inj.seed) : inj.tag;
      auto [faulty, manifest] = inject(m, addresses, tag, policy.tag());
      const auto dir = inj.out_dir.empty() ? default_out_dir()
                                           : std::filesystem::path(inj.out_dir);
      std::filesystem::create_directories(dir);
      save_checkpoint(faulty, dir / "faulty.ckpt");
      write_text_file(dir / "manifest.txt", format_manifest(manifest));
      for (const auto& r : manifest.records) {
        std::cout << "flipped: " << to_string(r.address) << "\n";
      }
      std::cout << "faulty: " << (dir / "faulty.ckpt").string() << "\n"
                << "manifest: " << (dir / "manifest.txt").string() << "\n";
      return kExitOk;
    }

    if (self_cmd->parsed()) {
      const ModelState m = load_checkpoint(self_opt.checkpoint);
      const SyntheticTaskSet X =
          generate_tasks(task_spec_from(self_opt.inputs), m.config.vocab_size);
      const ScalingSet A{parse_alpha_csv(self_opt.alphas)};
      const SensitivityReport r = localize_self(m, X, A);
      const std::string text = format_sensitivity(r);
      if (!self_opt.report.empty()) {
        write_text_file(self_opt.report, text);
      }
      std::cout << text;
      return kExitOk;
    }

    if (diff_cmd->parsed()) {
      const ModelState clean = load_checkpoint(diff_opt.clean);
      const ModelState faulty = load_checkpoint(diff_opt.faulty);
      const SyntheticTaskSet X =
          generate_tasks(task_spec_from(diff_opt.inputs), clean.config.vocab_size);
      DiffOptions opts;
      opts.metric = parse_div_metric(diff_opt.metric);
      opts.pick = diff_opt.pick == "max" ? BlockPick::MaxDeviation : BlockPick::Onset;
      opts.last_token_only = diff_opt.last_token;
      opts.multi_block = diff_opt.multi_block;
      const LocalizationResult r = localize_diff(clean, faulty, X, opts);
      const std::string text = format_diffloc(r);
      if (!diff_opt.report.empty()) {
        write_text_file(diff_opt.report, text);
      }
      std::cout << text;
      return r.fault_found ? kExitOk : kExitNoFault;
    }

    if (recover_cmd->parsed()) {
      const ModelState faulty = load_checkpoint(rec.faulty);
      if (rec.mode == "self") {
        if (rec.block < 0) {
          throw CLI::ValidationError("--block", "self recovery needs --block");
        }
        float attenuation = static_cast<float>(rec.attenuation);
        if (rec.sweep) {
          const SyntheticTaskSet X = generate_tasks(task_spec_from(rec.inputs),
                                                    faulty.config.vocab_size);
          auto [best, table] = sweep_attenuation(faulty, rec.block, X);
          for (const auto& p : table) {
            std::cout << "attenuation " << p.attenuation << ": loss " << p.loss
                      << "\n";
          }
          std::cout << "best: " << best << "\n";
          attenuation = best;
        }
        const ModelState out = recover_self(faulty, rec.block, attenuation);
        save_checkpoint(out, rec.out);
        std::cout << "recovered: " << rec.out << "\n";
        return kExitOk;
      }
      if (rec.mode != "diff") {
        throw CLI::ValidationError("--mode", "mode must be self or diff");
      }
      if (rec.clean.empty()) {
        throw CLI::ValidationError("--clean", "diff recovery needs --clean");
      }
      const ModelState clean = load_checkpoint(rec.clean);
      const SyntheticTaskSet X =
          generate_tasks(task_spec_from(rec.inputs), clean.config.vocab_size);
      const LocalizationResult loc = localize_diff(clean, faulty, X);
      if (!loc.fault_found || loc.findings.empty()) {
        std::cout << "no parameter fault found; nothing to restore\n";
        return kExitNoFault;
      }
      const ModelState restored = recover_diff(faulty, clean, loc, rec.element_patch);
      save_checkpoint(restored, rec.out);
      const bool exact = checkpoint_digest(restored) == checkpoint_digest(clean);
      std::cout << "recovered: " << rec.out << "\n"
                << "bitwise_identical_to_clean: " << (exact ? "yes" : "no")
                << "\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const ModelState m = load_checkpoint(ev.checkpoint);
      const SyntheticTaskSet X =
          generate_tasks(task_spec_from(ev.tasks), m.config.vocab_size);
      const EvalResult r = evaluate(m, X);
      EvalReport report;
      report.checkpoint_digest = checkpoint_digest_hex(m);
      report.input_set_id = X.id();
      report.loss = r.loss;
      report.accuracy = r.accuracy;
      const std::string text = format_eval(report);
      if (!ev.report.empty()) {
        write_text_file(ev.report, text);
      }
      std::cout << text;
      return kExitOk;
    }

    if (cost_cmd->parsed()) {
      const CostModelResult r = cost_model(cm.blocks, cm.tensors, cm.elems);
      std::cout << "brute: " << r.brute << "\n"
                << "staged: " << r.staged << "\n"
                << "ratio: " << static_cast<double>(r.brute) / static_cast<double>(r.staged)
                << "\n";
      return kExitOk;
    }

    if (camp_cmd->parsed()) {
      CampaignSpec spec;
      spec.base_checkpoint = camp.checkpoint;
      spec.run_diff = camp.settings == "diff" || camp.settings == "both";
      spec.run_self = camp.settings == "self" || camp.settings == "both";
      spec.inputs = task_spec_from(camp.inputs);
      spec.alphas = ScalingSet{parse_alpha_csv(camp.alphas)};
      spec.attenuation = static_cast<float>(camp.attenuation);
      spec.output_dir = camp.out_dir.empty() ? default_out_dir() / "campaign"
                                             : std::filesystem::path(camp.out_dir);
      spec.jobs = camp.jobs;

      std::vector<int> blocks;
      {
        std::stringstream ss(camp.blocks);
        std::string tok;
        while (std::getline(ss, tok, ',')) blocks.push_back(std::stoi(tok));
      }
      std::vector<std::string> sublayers;
      {
        std::stringstream ss(camp.sublayers);
        std::string tok;
        while (std::getline(ss, tok, ',')) sublayers.push_back(tok);
      }
      std::vector<std::uint64_t> seeds;
      {
        std::stringstream ss(camp.seeds);
        std::string tok;
        while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
      }
      for (int b : blocks) {
        if (camp.policy == "top-magnitude-msb") {
          // Deterministic policy: distinct trials take successive ranks.
          for (std::size_t r = 0; r < seeds.size(); ++r) {
            TrialSpec t;
            t.label = "b" + std::to_string(b) + "-rank" + std::to_string(r);
            t.policy.kind = PolicyKind::TopMagnitudeMsb;
            t.policy.block = b;
            t.policy.rank_offset = r;
            t.injected_at = "rank:" + std::to_string(r);
            spec.trials.push_back(std::move(t));
          }
          continue;
        }
        for (const auto& sub : sublayers) {
          for (std::uint64_t s : seeds) {
            TrialSpec t;
            t.label = "b" + std::to_string(b) + "-" + sub + "-s" + std::to_string(s);
            t.policy.kind = PolicyKind::RandomUniform;
            t.policy.bit_mode = camp.policy == "random-uniform"
                                    ? BitMode::UniformBit
                                    : BitMode::Msb;
            t.policy.block = b;
            t.policy.sublayer = sub;
            t.policy.seed = s;
            t.injected_at = "seed:" + std::to_string(s);
            spec.trials.push_back(std::move(t));
          }
        }
      }

      const CampaignResult result = run_campaign(spec);
      std::cout << read_text_file(result.summary_path);
      return result.all_verified() ? kExitOk : kExitMismatch;
    }

    if (plots_cmd->parsed()) {
      const std::string text = read_text_file(pl.report);
      const auto dir = pl.out_dir.empty() ? default_out_dir() / "plots"
                                          : std::filesystem::path(pl.out_dir);
      if (text.starts_with("bitloupe-sensitivity")) {
        emit_sensitivity_plots(parse_sensitivity(text), dir);
      } else if (text.starts_with("bitloupe-diffloc")) {
        emit_diffloc_plots(parse_diffloc(text), dir);
      } else {
        throw std::runtime_error("unrecognized report kind");
      }
      std::cout << "plots: " << dir.string() << "\n";
      return kExitOk;
    }

    if (trace_cmd->parsed()) {
      const ModelState m = load_checkpoint(tr.checkpoint);
      const SyntheticTaskSet X =
          generate_tasks(task_spec_from(tr.inputs), m.config.vocab_size);
      if (tr.item < 0 || tr.item >= static_cast<int>(X.items.size())) {
        throw std::runtime_error("--item out of range for the input set");
      }
      const ForwardTrace trace = forward(m, X.items[static_cast<std::size_t>(tr.item)].tokens,
                                         {.hidden_states = true});
      dump_hidden_states(trace, tr.out_dir);
      std::cout << "hidden states: " << tr.out_dir << " ("
                << trace.hidden.size() << " matrices)"
                << (trace.saw_nonfinite ? ", non-finite values present" : "")
                << "\n";
      return kExitOk;
    }

    if (sweep_cmd->parsed()) {
      const ModelState m = load_checkpoint(sw.checkpoint);
      const SyntheticTaskSet X =
          generate_tasks(task_spec_from(sw.inputs), m.config.vocab_size);
      const auto curve = alpha_sweep(m, sw.block, X, sw.lo, sw.hi, sw.step);
      emit_alpha_sweep_plot(curve, sw.out);
      std::cout << "curve: " << sw.out << " (" << curve.size() << " points)\n";
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
