#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mintent/data.hpp"
#include "mintent/linalg.hpp"

namespace mintent {

// Drifting-interest simulator. Spans are laid out so that split_spans(spans, 0.5)
// recovers them exactly: span 0 occupies the first half of the timeline.
struct SyntheticSpec {
  int num_users = 200;
  int num_items = 500;
  int num_categories = 5;
  int spans = 6;  // incremental spans; span 0 (pretraining) is generated in addition
  int interactions_per_user_per_span = 40;
  double p_new_category = 0.3;
  double p_drop_category = 0.2;
  std::uint64_t seed = 7;
  int dim = 64;
  double noise = 0.1;
  std::int64_t span_seconds = 86400;

  void validate() const;  // throws ConfigError
};

struct DriftEvents {
  std::vector<int> activated;
  std::vector<int> deactivated;
};

struct DriftGroundTruth {
  // events[user][span]; span 0 lists the initial categories as activated.
  std::vector<std::vector<DriftEvents>> events;
  // active[user][span]: active categories during that span, ascending.
  std::vector<std::vector<std::vector<int>>> active;
  std::vector<int> item_category;
};

struct SyntheticData {
  std::vector<Interaction> interactions;
  DriftGroundTruth truth;
  Matrix prototypes;       // num_categories x dim, orthonormal rows when num_categories <= dim
  Matrix item_embeddings;  // num_items x dim, prototype + isotropic noise
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

void write_ground_truth(const std::filesystem::path& path, const DriftGroundTruth& truth);

}  // namespace mintent
