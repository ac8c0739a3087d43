#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mintent {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

bool all_finite(std::span<const double> values);

// One bias-corrected Adam update at step `step` (1-based). Parameters and moments
// are rounded to float32 precision afterwards so checkpoints stay bit-exact.
// Throws TrainingError on a non-finite gradient without touching anything.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& cfg);

// Moments of one shared tensor.
struct Moments {
  std::vector<double> m;
  std::vector<double> v;

  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  friend bool operator==(const Moments&, const Moments&) = default;
};

// Shared-parameter optimizer state. Per-user query moments live in IntentBank.
struct OptimizerState {
  std::int64_t step = 0;
  Moments embeddings;
  Moments extractor;  // W for dynamic routing, W1 for self-attention

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

}  // namespace mintent
