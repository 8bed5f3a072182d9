// Builds (or loads) the shared fitted fixture cache and sanity-checks it.

#include <cstdio>

#include "bitloupe/checkpoint.hpp"
#include "support/fixtures.hpp"

int main() {
  const auto& fx = bitloupe::testing::fitted_fixture();
  std::printf("fixture ready: digest %s baseline loss %.6f accuracy %.4f\n",
              bitloupe::checkpoint_digest_hex(fx.clean_i8).substr(0, 16).c_str(),
              fx.baseline_loss_i8, fx.baseline_accuracy_i8);
  // a fixture that failed to memorize is useless for every downstream suite
  if (fx.baseline_loss_i8 > 1.0 || fx.baseline_accuracy_i8 < 0.9) {
    std::fprintf(stderr, "fixture failed to fit its task\n");
    return 1;
  }
  return 0;
}
