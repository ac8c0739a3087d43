#include "mintent/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "mintent/errors.hpp"

namespace mintent {

namespace {

bool parse_int(std::string_view field, std::int64_t& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) return false;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_row(std::string_view line, Interaction& row) {
  std::int64_t values[3];
  std::size_t start = 0;
  for (int f = 0; f < 3; ++f) {
    const std::size_t comma = line.find(',', start);
    const bool last = f == 2;
    if (last != (comma == std::string_view::npos)) return false;
    const std::size_t stop = last ? line.size() : comma;
    if (!parse_int(line.substr(start, stop - start), values[f])) return false;
    start = stop + 1;
  }
  if (values[0] < 0 || values[1] < 0 || values[2] < 0) return false;
  row = {values[0], values[1], values[2]};
  return true;
}

}  // namespace

std::vector<ItemId> UserSequence::train_items() const {
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (marks.empty() || marks[i] == Holdout::train) out.push_back(items[i]);
  }
  return out;
}

ItemId UserSequence::target(Holdout mark) const {
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (marks[i] == mark) return items[i];
  }
  return -1;
}

std::size_t SpanDataset::interaction_count() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.items.size();
  return n;
}

const UserSequence* SpanDataset::find(UserId user) const {
  auto it = std::lower_bound(users.begin(), users.end(), user,
                             [](const UserSequence& s, UserId u) { return s.user < u; });
  if (it == users.end() || it->user != user) return nullptr;
  return &*it;
}

IngestResult ingest_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open interaction log: " + path.string());

  IngestResult result;
  std::string line;
  if (!std::getline(in, line)) return result;  // no header, nothing to read

  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++rows;
    Interaction row;
    if (parse_row(line, row)) {
      result.interactions.push_back(row);
    } else {
      ++result.malformed_lines;
    }
  }
  if (in.bad()) throw IoError("read failure on interaction log: " + path.string());
  if (rows > 0 && static_cast<double>(result.malformed_lines) > 0.01 * static_cast<double>(rows)) {
    std::ostringstream msg;
    msg << path.string() << ": " << result.malformed_lines << " of " << rows
        << " rows are malformed (expected user_id,item_id,timestamp)";
    throw ParseError(msg.str());
  }
  return result;
}

void write_log(const std::filesystem::path& path, const std::vector<Interaction>& interactions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write interaction log: " + path.string());
  out << "user_id,item_id,timestamp\n";
  for (const auto& r : interactions) out << r.user << ',' << r.item << ',' << r.timestamp << '\n';
  if (!out) throw IoError("write failure on interaction log: " + path.string());
}

std::vector<Interaction> filter_min_interactions(const std::vector<Interaction>& interactions,
                                                 std::size_t min_count) {
  std::unordered_map<UserId, std::size_t> counts;
  for (const auto& r : interactions) ++counts[r.user];
  std::vector<Interaction> out;
  out.reserve(interactions.size());
  for (const auto& r : interactions) {
    if (counts[r.user] >= min_count) out.push_back(r);
  }
  return out;
}

namespace {

std::vector<double> span_boundaries(std::int64_t max_ts, int num_spans, double alpha) {
  const double z = static_cast<double>(max_ts);
  const double first = alpha * z;
  const double width = (z - first) / num_spans;
  std::vector<double> upper(static_cast<std::size_t>(num_spans) + 1);
  upper[0] = first;
  for (int k = 1; k < num_spans; ++k) upper[static_cast<std::size_t>(k)] = first + k * width;
  upper[static_cast<std::size_t>(num_spans)] = z;
  return upper;
}

}  // namespace

int span_of(std::int64_t timestamp, std::int64_t max_timestamp, int num_spans, double alpha) {
  const auto upper = span_boundaries(max_timestamp, num_spans, alpha);
  const double ts = static_cast<double>(timestamp);
  for (std::size_t k = 0; k < upper.size(); ++k) {
    if (ts <= upper[k]) return static_cast<int>(k);
  }
  return num_spans;
}

std::vector<SpanDataset> split_spans(const std::vector<Interaction>& interactions, int num_spans,
                                     double alpha) {
  if (num_spans < 1) throw ConfigError("number of incremental spans must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (interactions.empty()) throw DataError("cannot split an empty interaction log");

  std::int64_t lo = interactions.front().timestamp;
  std::int64_t hi = lo;
  for (const auto& r : interactions) {
    if (r.timestamp < 0) throw DataError("negative timestamp in interaction log");
    lo = std::min(lo, r.timestamp);
    hi = std::max(hi, r.timestamp);
  }
  if (lo == hi) throw DataError("all timestamps are equal; cannot form time spans");

  const auto upper = span_boundaries(hi, num_spans, alpha);
  std::vector<std::map<UserId, std::vector<std::size_t>>> grouped(upper.size());
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const double ts = static_cast<double>(interactions[i].timestamp);
    std::size_t k = 0;
    while (k + 1 < upper.size() && ts > upper[k]) ++k;
    grouped[k][interactions[i].user].push_back(i);
  }

  std::vector<SpanDataset> spans(upper.size());
  for (std::size_t k = 0; k < upper.size(); ++k) {
    spans[k].span_index = static_cast<int>(k);
    for (auto& [user, idx] : grouped[k]) {
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return interactions[a].timestamp < interactions[b].timestamp;
      });
      UserSequence seq;
      seq.user = user;
      for (std::size_t i : idx) {
        seq.items.push_back(interactions[i].item);
        seq.timestamps.push_back(interactions[i].timestamp);
      }
      spans[k].users.push_back(std::move(seq));
    }
  }
  return spans;
}

SpanDataset split_holdout(SpanDataset span) {
  for (auto& seq : span.users) {
    const std::size_t n = seq.items.size();
    seq.marks.assign(n, Holdout::train);
    if (n >= 2) seq.marks[n - 1] = Holdout::test;
    if (n >= 3) seq.marks[n - 2] = Holdout::valid;
  }
  return span;
}

std::vector<ItemId> sample_negatives(ItemId target, std::int64_t universe_size, std::size_t n,
                                     std::mt19937_64& rng) {
  if (static_cast<std::int64_t>(n) >= universe_size) {
    throw ConfigError("negative sample count must be smaller than the item universe");
  }
  const bool target_inside = target >= 0 && target < universe_size;
  const std::int64_t pool = universe_size - (target_inside ? 1 : 0);
  auto lift = [&](std::int64_t j) -> ItemId { return (target_inside && j >= target) ? j + 1 : j; };

  // Floyd's subset sampling over [0, pool).
  std::vector<ItemId> out;
  out.reserve(n);
  std::unordered_set<std::int64_t> chosen;
  for (std::int64_t j = pool - static_cast<std::int64_t>(n); j < pool; ++j) {
    std::uniform_int_distribution<std::int64_t> pick(0, j);
    std::int64_t t = pick(rng);
    if (chosen.count(t)) t = j;
    chosen.insert(t);
    out.push_back(lift(t));
  }
  return out;
}

}  // namespace mintent
