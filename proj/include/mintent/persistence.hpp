#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mintent/trainer.hpp"

namespace mintent {

inline constexpr int kCheckpointFormatVersion = 1;

// A checkpoint `<base>` is the pair `<base>.manifest.json` + `<base>.tensors.bin`.
// The payload holds little-endian float32 values, tensor after tensor in manifest
// order. Every trainable value is kept at float32 precision, so the round trip is
// exact; per-intent active-score accumulators are stored in the manifest as JSON
// numbers (shortest round-trip form).
std::filesystem::path manifest_path(const std::filesystem::path& base);
std::filesystem::path payload_path(const std::filesystem::path& base);

// Throws IoError (with partial files removed) or CheckpointError when a value is not
// representable in float32.
void save_checkpoint(const TimelineState& state, const std::filesystem::path& base);

struct LoadedCheckpoint {
  TimelineState state;
  std::vector<std::string> config_mismatches;  // keys differing from `expected`
};

// Throws CheckpointError on a missing payload, version mismatch, payload length
// mismatch, or tensor shapes that disagree with `expected` (dim, attention_dim,
// extractor). Other config differences are reported, not fatal; the returned state
// then carries `expected` as its config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& base, const RunConfig& expected);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& base);

}  // namespace mintent
