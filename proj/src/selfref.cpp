#include "bitloupe/selfref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/parallel.hpp"

namespace bitloupe {

ScalingSet ScalingSet::default_set() {
  return ScalingSet{{0.6, 0.7, 0.8, 0.9, 1.1, 1.2, 1.3, 1.4}};
}

void ScalingSet::validate() const {
  if (values.empty()) {
    throw std::invalid_argument("scaling set is empty");
  }
  for (double v : values) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("scaling values must be positive");
    }
    if (v == 1.0) {
      throw std::invalid_argument("scaling set must exclude 1.0");
    }
  }
}

double delta_loss(const ModelState& m, int block, double alpha,
                  const SyntheticTaskSet& X) {
  if (block < 0 || block >= m.config.n_blocks) {
    throw std::out_of_range("block index out of range");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("alpha must be positive");
  }
  if (X.items.empty()) {
    throw std::invalid_argument("input set is empty");
  }
  const double base = evaluate(m, X).loss;
  const double scaled =
      evaluate(with_alpha(m, block, static_cast<float>(alpha)), X).loss;
  return scaled - base;
}

std::vector<std::pair<double, double>> alpha_sweep(const ModelState& m,
                                                   int block,
                                                   const SyntheticTaskSet& X,
                                                   double lo, double hi,
                                                   double step) {
  if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0)) {
    throw std::invalid_argument("degenerate sweep range");
  }
  if (block < 0 || block >= m.config.n_blocks) {
    throw std::out_of_range("block index out of range");
  }
  const int points = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    double v = lo + i * step;
    if (std::fabs(v - 1.0) < 1e-9) {
      v = 1.0;  // exact nominal point, so its delta is exactly zero
    }
    grid[static_cast<std::size_t>(i)] = v;
  }
  const double base = evaluate(m, X).loss;
  std::vector<std::pair<double, double>> curve(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const double a = grid[i];
    const double loss =
        a == 1.0 && m.alpha[static_cast<std::size_t>(block)] == 1.0f
            ? base
            : evaluate(with_alpha(m, block, static_cast<float>(a)), X).loss;
    curve[i] = {a, loss - base};
  });
  return curve;
}

SensitivityReport localize_self(const ModelState& m, const SyntheticTaskSet& X,
                                const ScalingSet& A) {
  A.validate();
  if (X.items.empty()) {
    throw std::invalid_argument("input set is empty");
  }
  const int n_blocks = m.config.n_blocks;

  SensitivityReport report;
  report.checkpoint_digest = checkpoint_digest_hex(m);
  report.input_set_id = X.id();
  report.alphas = A.values;
  report.base_loss = evaluate(m, X).loss;
  report.delta_loss.assign(static_cast<std::size_t>(n_blocks),
                           std::vector<double>(A.values.size(), 0.0));

  // The (block x alpha) grid of probes is independent; every cell owns its
  // scaling view of the shared immutable tensors.
  const std::size_t cells = static_cast<std::size_t>(n_blocks) * A.values.size();
  parallel_for(cells, [&](std::size_t cell) {
    const int block = static_cast<int>(cell / A.values.size());
    const std::size_t ai = cell % A.values.size();
    const double alpha = A.values[ai];
    const double loss =
        evaluate(with_alpha(m, block, static_cast<float>(alpha)), X).loss;
    report.delta_loss[static_cast<std::size_t>(block)][ai] =
        loss - report.base_loss;
  });

  report.bss.resize(static_cast<std::size_t>(n_blocks));
  for (int b = 0; b < n_blocks; ++b) {
    double s = 0.0;
    for (double d : report.delta_loss[static_cast<std::size_t>(b)]) {
      s += std::fabs(d);
    }
    report.bss[static_cast<std::size_t>(b)] = s;
  }

  report.suspected_block = 0;
  for (int b = 1; b < n_blocks; ++b) {
    if (report.bss[static_cast<std::size_t>(b)] >
        report.bss[static_cast<std::size_t>(report.suspected_block)]) {
      report.suspected_block = b;
    }
  }

  std::vector<double> sorted = report.bss;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double peak = report.bss[static_cast<std::size_t>(report.suspected_block)];
  report.bss_max_over_median =
      median > 0.0 ? peak / median
                   : std::numeric_limits<double>::infinity();

  report.forward_passes =
      (cells + 1) * static_cast<std::uint64_t>(X.items.size());
  return report;
}

}  // namespace bitloupe
