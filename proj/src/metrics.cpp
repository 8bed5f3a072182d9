#include "bitloupe/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bitloupe/parallel.hpp"

namespace bitloupe {

double cross_entropy(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows) != targets.size()) {
    throw std::invalid_argument("logits rows must match target count");
  }
  double total = 0.0;
  for (int t = 0; t < logits.rows; ++t) {
    const int target = targets[static_cast<std::size_t>(t)];
    if (target < 0 || target >= logits.cols) {
      throw std::invalid_argument("target token out of vocabulary range");
    }
    const float* row = logits.row(t);
    float mx = row[0];
    for (int c = 1; c < logits.cols; ++c) {
      mx = std::max(mx, row[c]);
    }
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) {
      sum += std::exp(static_cast<double>(row[c]) - mx);
    }
    const double lse = static_cast<double>(mx) + std::log(sum);
    total += lse - static_cast<double>(row[target]);
  }
  return total / logits.rows;
}

double accuracy(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows) != targets.size()) {
    throw std::invalid_argument("logits rows must match target count");
  }
  int correct = 0;
  for (int t = 0; t < logits.rows; ++t) {
    const float* row = logits.row(t);
    int best = 0;
    for (int c = 1; c < logits.cols; ++c) {
      if (row[c] > row[best]) {
        best = c;
      }
    }
    if (best == targets[static_cast<std::size_t>(t)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / logits.rows;
}

EvalResult evaluate(const ModelState& m, const SyntheticTaskSet& tasks) {
  if (tasks.vocab != m.config.vocab_size) {
    throw std::invalid_argument("task set vocabulary does not match model");
  }
  if (tasks.items.empty()) {
    throw std::invalid_argument("task set is empty");
  }
  std::vector<double> losses(tasks.items.size());
  std::vector<double> accs(tasks.items.size());
  parallel_for(tasks.items.size(), [&](std::size_t i) {
    const TaskItem& item = tasks.items[i];
    const ForwardTrace trace = forward(m, item.tokens);
    losses[i] = cross_entropy(trace.logits, item.targets);
    accs[i] = accuracy(trace.logits, item.targets);
  });
  EvalResult r;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    r.loss += losses[i];
    r.accuracy += accs[i];
  }
  r.loss /= static_cast<double>(losses.size());
  r.accuracy /= static_cast<double>(accs.size());
  r.forward_passes = tasks.items.size();
  return r;
}

}  // namespace bitloupe
