#include "fixtures.hpp"

#include <unistd.h>

#include <cstdlib>

#include "bitloupe/checkpoint.hpp"
#include "bitloupe/metrics.hpp"
#include "bitloupe/tensor.hpp"

namespace bitloupe::testing {

ModelConfig fixture_config() { return {8, 64, 4, 256, 256, 64, 2024}; }

FitOptions fixture_fit_options() {
  FitOptions fo;
  fo.data = TaskSpec{TaskKind::ModAdd, 11, 256, 32};
  fo.batch = 16;
  fo.steps = 1200;
  fo.lr = 2.5e-3f;
  fo.scale_jitter = true;
  fo.jitter_lo = 0.5f;
  fo.jitter_hi = 1.5f;
  fo.drop_prob = 0.1f;
  fo.jitter_seed = 1;
  return fo;
}

TaskSpec fixture_eval_spec() { return TaskSpec{TaskKind::ModAdd, 11, 64, 32}; }

namespace {

std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("BITLOUPE_FIXTURE_DIR")) {
    return env;
  }
  return std::filesystem::current_path() / "bitloupe-fixture-cache";
}

ModelState build_or_load_f32() {
  const auto dir = cache_dir();
  const auto path = dir / "fixture-f32-v1.ckpt";
  if (std::filesystem::exists(path)) {
    return load_checkpoint(path);
  }
  ModelState fitted = fit_model(init_model(fixture_config()), fixture_fit_options());
  std::filesystem::create_directories(dir);
  const auto tmp = dir / ("fixture-f32-v1.ckpt.tmp" + std::to_string(::getpid()));
  save_checkpoint(fitted, tmp);
  std::filesystem::rename(tmp, path);  // identical bytes even if raced
  return fitted;
}

}  // namespace

const Fixture& fitted_fixture() {
  static const Fixture fixture = [] {
    Fixture f;
    f.clean_f32 = build_or_load_f32();
    f.clean_i8 = f.clean_f32;
    for (auto& [name, tensor] : f.clean_i8.tensors) {
      tensor = std::make_shared<WeightTensor>(quantize(*tensor));
    }
    f.eval_set = generate_tasks(fixture_eval_spec(), fixture_config().vocab_size);
    const EvalResult base = evaluate(f.clean_i8, f.eval_set);
    f.baseline_loss_i8 = base.loss;
    f.baseline_accuracy_i8 = base.accuracy;
    return f;
  }();
  return fixture;
}

ModelConfig tiny_config() { return {2, 8, 2, 16, 16, 16, 42}; }

}  // namespace bitloupe::testing
