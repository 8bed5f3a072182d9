#include "bitloupe/recovery.hpp"

#include <set>
#include <stdexcept>

#include "bitloupe/metrics.hpp"
#include "bitloupe/parallel.hpp"

namespace bitloupe {

const char* recovery_mode_name(RecoveryMode m) {
  switch (m) {
    case RecoveryMode::ResidualZeroing:
      return "residual-zeroing";
    case RecoveryMode::ResidualAttenuation:
      return "residual-attenuation";
    case RecoveryMode::TensorRestoration:
      return "tensor-restoration";
  }
  throw std::logic_error("bad recovery mode");
}

const char* metric_direction_name(MetricDirection d) {
  return d == MetricDirection::HigherBetter ? "higher-better" : "lower-better";
}

ModelState recover_self(const ModelState& m, int block, float attenuation) {
  if (block < 0 || block >= m.config.n_blocks) {
    throw std::out_of_range("block index out of range");
  }
  if (!(attenuation >= 0.0f) || attenuation >= 1.0f) {
    throw std::invalid_argument("attenuation must lie in [0, 1)");
  }
  return with_alpha(m, block, attenuation);
}

ModelState recover_diff(const ModelState& faulty, const ModelState& clean,
                        const LocalizationResult& result, bool element_patch) {
  if (result.findings.empty()) {
    throw std::invalid_argument("localization result has no bit findings");
  }
  ModelState out = faulty;
  std::set<std::string> touched;
  for (const auto& f : result.findings) {
    touched.insert(f.tensor);
    if (clean.tensors.find(f.tensor) == clean.tensors.end() ||
        faulty.tensors.find(f.tensor) == faulty.tensors.end()) {
      throw std::invalid_argument("finding references nonexistent tensor " +
                                  f.tensor);
    }
  }
  if (!element_patch) {
    for (const auto& name : touched) {
      out.tensors[name] = clean.tensors.at(name);
    }
    return out;
  }
  for (const auto& name : touched) {
    const WeightTensor& ct = clean.tensor(name);
    const WeightTensor& ft = faulty.tensor(name);
    if (ct.dtype() != ft.dtype() || ct.shape() != ft.shape()) {
      throw std::invalid_argument("tensor " + name +
                                  " differs in dtype/shape between models");
    }
    std::vector<std::uint8_t> bytes(ft.raw_bytes().begin(), ft.raw_bytes().end());
    const std::size_t esize = dtype_size(ft.dtype());
    for (const auto& f : result.findings) {
      if (f.tensor != name) {
        continue;
      }
      const std::size_t off = f.element * esize;
      std::copy(ct.raw_bytes().begin() + static_cast<std::ptrdiff_t>(off),
                ct.raw_bytes().begin() + static_cast<std::ptrdiff_t>(off + esize),
                bytes.begin() + static_cast<std::ptrdiff_t>(off));
    }
    out.tensors[name] = std::make_shared<WeightTensor>(WeightTensor::from_raw(
        name, ft.dtype(), ft.shape(), ft.quant_scale(), std::move(bytes)));
  }
  return out;
}

double compute_recovery(double baseline, double corrupted, double recovered,
                        MetricDirection direction) {
  if (baseline == corrupted) {
    throw std::invalid_argument(
        "recovery percentage undefined when baseline equals corrupted");
  }
  if (direction == MetricDirection::HigherBetter) {
    return (recovered - corrupted) / (baseline - corrupted) * 100.0;
  }
  return (corrupted - recovered) / (corrupted - baseline) * 100.0;
}

RecoveryOutcome make_outcome(RecoveryMode mode, MetricDirection direction,
                             double baseline, double corrupted,
                             double recovered) {
  RecoveryOutcome o;
  o.mode = mode;
  o.direction = direction;
  o.baseline_metric = baseline;
  o.corrupted_metric = corrupted;
  o.recovered_metric = recovered;
  o.recovery_percentage = compute_recovery(baseline, corrupted, recovered, direction);
  return o;
}

std::pair<float, std::vector<AttenuationSweepPoint>> sweep_attenuation(
    const ModelState& m, int block, const SyntheticTaskSet& X,
    std::span<const float> values) {
  static constexpr float kDefault[] = {0.0f, 0.1f, 0.2f, 0.3f, 0.4f,
                                       0.5f, 0.6f, 0.7f, 0.8f, 0.9f};
  if (values.empty()) {
    values = kDefault;
  }
  std::vector<AttenuationSweepPoint> table(values.size());
  parallel_for(values.size(), [&](std::size_t i) {
    const ModelState view = recover_self(m, block, values[i]);
    table[i] = {values[i], evaluate(view, X).loss};
  });
  float best = table[0].attenuation;
  double best_loss = table[0].loss;
  for (const auto& p : table) {
    if (p.loss < best_loss) {
      best_loss = p.loss;
      best = p.attenuation;
    }
  }
  return {best, table};
}

}  // namespace bitloupe
