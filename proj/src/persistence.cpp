#include "mintent/persistence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "mintent/config.hpp"
#include "mintent/errors.hpp"
#include "mintent/report.hpp"

namespace mintent {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

struct PayloadWriter {
  std::vector<char> bytes;
  ordered_json descriptors = ordered_json::array();

  void add(const std::string& name, std::span<const double> values, std::size_t rows, std::size_t cols) {
    ordered_json d;
    d["name"] = name;
    d["shape"] = {rows, cols};
    d["offset"] = bytes.size();
    d["byte_length"] = values.size() * 4;
    descriptors.push_back(std::move(d));
    for (double v : values) {
      const auto f = static_cast<float>(v);
      if (std::isfinite(v) && static_cast<double>(f) != v) {
        throw CheckpointError("tensor '" + name + "' holds a value that is not exactly representable in float32");
      }
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      bits = to_le(bits);
      const char* p = reinterpret_cast<const char*>(&bits);
      bytes.insert(bytes.end(), p, p + 4);
    }
  }
  void add(const std::string& name, const Matrix& m) { add(name, m.data(), m.rows(), m.cols()); }
};

struct PayloadReader {
  std::vector<char> bytes;
  std::map<std::string, json> descriptors;

  std::vector<double> take(const std::string& name, std::size_t rows, std::size_t cols) const {
    const auto it = descriptors.find(name);
    if (it == descriptors.end()) throw CheckpointError("checkpoint has no tensor '" + name + "'");
    const auto shape = it->second.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != rows || (rows > 0 && shape[1] != cols)) {
      throw CheckpointError("shape mismatch for tensor '" + name + "': checkpoint has [" +
                            (shape.size() == 2 ? std::to_string(shape[0]) + "," + std::to_string(shape[1]) : "?") +
                            "], expected [" + std::to_string(rows) + "," + std::to_string(cols) + "]");
    }
    const auto offset = it->second.at("offset").get<std::size_t>();
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + offset + 4 * i, 4);
      bits = to_le(bits);
      float f;
      std::memcpy(&f, &bits, 4);
      out[i] = static_cast<double>(f);
    }
    return out;
  }

  Matrix matrix(const std::string& name, std::size_t rows, std::size_t cols) const {
    auto values = take(name, rows, cols);
    // Empty tensors keep whatever width they were saved with.
    if (rows == 0) cols = descriptors.at(name).at("shape")[1].get<std::size_t>();
    Matrix m(rows, cols);
    m.data() = std::move(values);
    return m;
  }
};

std::string bank_prefix(std::size_t user) { return "bank." + std::to_string(user) + "."; }

void remove_quietly(const fs::path& p) {
  std::error_code ec;
  fs::remove(p, ec);
}

void write_bytes(const fs::path& path, const char* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data, static_cast<std::streamsize>(size));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

fs::path manifest_path(const fs::path& base) { return fs::path(base.string() + ".manifest.json"); }
fs::path payload_path(const fs::path& base) { return fs::path(base.string() + ".tensors.bin"); }

void save_checkpoint(const TimelineState& state, const fs::path& base) {
  PayloadWriter payload;
  const auto& m = state.model;
  payload.add("embeddings", m.embeddings);
  payload.add("extractor", m.extractor);
  payload.add("adam.embeddings.m", state.optimizer.embeddings.m, m.embeddings.rows(), m.embeddings.cols());
  payload.add("adam.embeddings.v", state.optimizer.embeddings.v, m.embeddings.rows(), m.embeddings.cols());
  payload.add("adam.extractor.m", state.optimizer.extractor.m, m.extractor.rows(), m.extractor.cols());
  payload.add("adam.extractor.v", state.optimizer.extractor.v, m.extractor.rows(), m.extractor.cols());

  ordered_json banks = ordered_json::array();
  for (std::size_t u = 0; u < state.banks.size(); ++u) {
    const IntentBank& b = state.banks[u];
    if (b.empty()) continue;
    const auto prefix = bank_prefix(u);
    payload.add(prefix + "vectors", b.vectors);
    payload.add(prefix + "prev_vectors", b.prev_vectors);
    if (b.has_attention()) {
      payload.add(prefix + "attention", b.attention);
      payload.add(prefix + "attention_m", b.attention_m);
      payload.add(prefix + "attention_v", b.attention_v);
    }
    ordered_json d;
    d["user"] = u;
    d["k"] = b.size();
    d["prev_k"] = b.prev_vectors.rows();
    d["creation_span"] = b.creation_span;
    d["as_accum"] = b.as_accum;
    d["as_count"] = b.as_count;
    d["attention"] = b.has_attention();
    banks.push_back(std::move(d));
  }

  ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["config"] = to_json(state.config);
  manifest["span"] = state.completed_span;
  manifest["num_users"] = state.banks.size();
  manifest["num_items"] = m.num_items();
  manifest["optimizer_step"] = state.optimizer.step;
  manifest["payload_bytes"] = payload.bytes.size();
  manifest["tensors"] = std::move(payload.descriptors);
  manifest["banks"] = std::move(banks);
  ordered_json reports = ordered_json::array();
  for (const auto& r : state.reports) reports.push_back(to_json(r));
  manifest["reports"] = std::move(reports);

  const auto mpath = manifest_path(base);
  const auto ppath = payload_path(base);
  try {
    if (base.has_parent_path()) fs::create_directories(base.parent_path());
    write_bytes(ppath, payload.bytes.data(), payload.bytes.size());
    const std::string text = manifest.dump(1) + "\n";
    write_bytes(mpath, text.data(), text.size());
  } catch (...) {
    remove_quietly(ppath);
    remove_quietly(mpath);
    throw;
  }
}

namespace {

LoadedCheckpoint load_impl(const fs::path& base, const RunConfig* expected) {
  const auto mpath = manifest_path(base);
  const auto ppath = payload_path(base);
  std::ifstream min(mpath);
  if (!min) throw CheckpointError("checkpoint manifest " + mpath.string() + " is missing");
  json manifest;
  try {
    manifest = json::parse(min);
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint manifest " + mpath.string() + " is not valid JSON: " + e.what());
  }

  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version) + " (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
    }

    PayloadReader payload;
    {
      std::ifstream pin(ppath, std::ios::binary);
      if (!pin) throw CheckpointError("checkpoint payload " + ppath.string() + " is missing");
      payload.bytes.assign(std::istreambuf_iterator<char>(pin), std::istreambuf_iterator<char>());
    }
    const auto declared = manifest.at("payload_bytes").get<std::size_t>();
    if (payload.bytes.size() != declared) {
      throw CheckpointError("checkpoint payload length mismatch: manifest declares " + std::to_string(declared) +
                            " bytes, " + ppath.string() + " has " + std::to_string(payload.bytes.size()));
    }
    std::size_t cursor = 0;
    for (const auto& d : manifest.at("tensors")) {
      const auto offset = d.at("offset").get<std::size_t>();
      const auto length = d.at("byte_length").get<std::size_t>();
      const auto shape = d.at("shape").get<std::vector<std::size_t>>();
      std::size_t count = 1;
      for (auto s : shape) count *= s;
      if (offset != cursor || length != 4 * count || offset + length > payload.bytes.size()) {
        throw CheckpointError("tensor '" + d.at("name").get<std::string>() + "' has an inconsistent descriptor");
      }
      cursor += length;
      payload.descriptors[d.at("name").get<std::string>()] = d;
    }

    LoadedCheckpoint out;
    TimelineState& s = out.state;
    const RunConfig saved = run_config_from_json(manifest.at("config"));
    s.config = saved;
    if (expected) {
      if (expected->extractor != saved.extractor) throw CheckpointError("checkpoint extractor differs from the run config");
      out.config_mismatches = config_differences(saved, *expected);
      s.config = *expected;
    }
    const std::size_t d = expected ? static_cast<std::size_t>(expected->dim) : static_cast<std::size_t>(saved.dim);
    const std::size_t da = expected ? static_cast<std::size_t>(expected->attention_dim)
                                    : static_cast<std::size_t>(saved.attention_dim);
    const auto num_items = manifest.at("num_items").get<std::size_t>();
    const auto num_users = manifest.at("num_users").get<std::size_t>();
    const bool sa = saved.extractor == ExtractorKind::sa;
    const std::size_t ext_rows = sa ? da : d;

    s.model.kind = saved.extractor;
    s.model.embeddings = payload.matrix("embeddings", num_items, d);
    s.model.extractor = payload.matrix("extractor", ext_rows, d);
    s.optimizer.step = manifest.at("optimizer_step").get<std::int64_t>();
    s.optimizer.embeddings.m = payload.take("adam.embeddings.m", num_items, d);
    s.optimizer.embeddings.v = payload.take("adam.embeddings.v", num_items, d);
    s.optimizer.extractor.m = payload.take("adam.extractor.m", ext_rows, d);
    s.optimizer.extractor.v = payload.take("adam.extractor.v", ext_rows, d);
    s.completed_span = manifest.at("span").get<int>();

    s.banks.assign(num_users, IntentBank{});
    for (const auto& b : manifest.at("banks")) {
      const auto u = b.at("user").get<std::size_t>();
      if (u >= num_users) throw CheckpointError("bank for user " + std::to_string(u) + " is out of range");
      const auto k = b.at("k").get<std::size_t>();
      const auto prev_k = b.at("prev_k").get<std::size_t>();
      const auto prefix = bank_prefix(u);
      IntentBank& bank = s.banks[u];
      bank.vectors = payload.matrix(prefix + "vectors", k, d);
      bank.prev_vectors = payload.matrix(prefix + "prev_vectors", prev_k, d);
      bank.creation_span = b.at("creation_span").get<std::vector<int>>();
      bank.as_accum = b.at("as_accum").get<std::vector<double>>();
      bank.as_count = b.at("as_count").get<std::vector<int>>();
      if (b.at("attention").get<bool>()) {
        bank.attention = payload.matrix(prefix + "attention", k, da);
        bank.attention_m = payload.matrix(prefix + "attention_m", k, da);
        bank.attention_v = payload.matrix(prefix + "attention_v", k, da);
      }
      if (!bank.consistent()) throw CheckpointError("bank for user " + std::to_string(u) + " is inconsistent");
    }
    for (const auto& r : manifest.at("reports")) s.reports.push_back(span_report_from_json(r));
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint manifest " + mpath.string() + " is malformed: " + e.what());
  }
}

}  // namespace

LoadedCheckpoint load_checkpoint(const fs::path& base, const RunConfig& expected) { return load_impl(base, &expected); }
LoadedCheckpoint load_checkpoint(const fs::path& base) { return load_impl(base, nullptr); }

}  // namespace mintent
