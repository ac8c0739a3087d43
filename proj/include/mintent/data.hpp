#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "mintent/linalg.hpp"

namespace mintent {

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

enum class Holdout : std::uint8_t { train, valid, test };

// One user's chronologically ordered interactions inside a span.
struct UserSequence {
  UserId user = 0;
  std::vector<ItemId> items;
  std::vector<std::int64_t> timestamps;
  std::vector<Holdout> marks;  // empty until split_holdout

  std::vector<ItemId> train_items() const;
  // Returns -1 when the user has no item with that mark.
  ItemId target(Holdout mark) const;
};

struct SpanDataset {
  int span_index = 0;
  std::vector<UserSequence> users;  // ascending user id

  std::size_t interaction_count() const;
  const UserSequence* find(UserId user) const;
};

struct IngestResult {
  std::vector<Interaction> interactions;
  std::size_t malformed_lines = 0;
};

// Reads a `user_id,item_id,timestamp` CSV with a header line. Malformed rows are
// skipped and counted; more than 1% malformed rows raises ParseError.
IngestResult ingest_log(const std::filesystem::path& path);

void write_log(const std::filesystem::path& path, const std::vector<Interaction>& interactions);

std::vector<Interaction> filter_min_interactions(const std::vector<Interaction>& interactions,
                                                 std::size_t min_count);

// Span 0 covers [0, alpha*Z]; spans 1..T split (alpha*Z, Z] evenly, where Z is the
// largest timestamp. A timestamp on a boundary belongs to the earlier span.
std::vector<SpanDataset> split_spans(const std::vector<Interaction>& interactions, int num_spans,
                                     double alpha);

// Index of the span an event at `timestamp` lands in; exposed for tests.
int span_of(std::int64_t timestamp, std::int64_t max_timestamp, int num_spans, double alpha);

// Last event -> test, second last -> valid, rest -> train. Two events: train + test.
// One event: train only.
SpanDataset split_holdout(SpanDataset span);

// n distinct ids from [0, universe_size) \ {target}, uniform without replacement.
std::vector<ItemId> sample_negatives(ItemId target, std::int64_t universe_size, std::size_t n,
                                     std::mt19937_64& rng);

}  // namespace mintent
