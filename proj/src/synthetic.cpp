#include "mintent/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "mintent/errors.hpp"

namespace mintent {

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("synthetic spec: ") + what);
  };
  require(num_users > 0, "num_users must be > 0");
  require(num_items > 0, "num_items must be > 0");
  require(num_categories > 0, "num_categories must be > 0");
  require(num_categories <= num_items, "num_categories must not exceed num_items");
  require(spans > 0, "spans must be > 0");
  require(interactions_per_user_per_span > 0, "interactions_per_user_per_span must be > 0");
  require(p_new_category >= 0.0 && p_new_category <= 1.0, "p_new_category must lie in [0,1]");
  require(p_drop_category >= 0.0 && p_drop_category <= 1.0, "p_drop_category must lie in [0,1]");
  require(dim > 0, "dim must be > 0");
  require(noise >= 0.0, "noise must be >= 0");
  require(span_seconds >= 10, "span_seconds must be >= 10");
}

namespace {

Matrix make_prototypes(int count, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix protos(static_cast<std::size_t>(count), static_cast<std::size_t>(dim));
  for (int c = 0; c < count; ++c) {
    auto row = protos.row(static_cast<std::size_t>(c));
    for (double& v : row) v = gauss(rng);
    if (c < dim) {
      // Two Gram-Schmidt passes keep the rows orthonormal to working precision.
      for (int pass = 0; pass < 2; ++pass) {
        for (int p = 0; p < c; ++p) {
          auto prev = protos.row(static_cast<std::size_t>(p));
          axpy(-dot(row, prev), prev, row);
        }
      }
    }
    const double n = norm2(row);
    for (double& v : row) v /= n;
  }
  return protos;
}

std::int64_t event_time(const SyntheticSpec& spec, int span, int j) {
  // Span 0 covers [0, S*P]; span s >= 1 covers ((S+s-1)P, (S+s)P]. Events sit in the
  // middle 80% of their period so boundary rounding never moves them.
  const double p = static_cast<double>(spec.span_seconds);
  const double start = span == 0 ? 0.0 : (spec.spans + span - 1) * p;
  const double len = span == 0 ? spec.spans * p : p;
  const double step = 0.8 * len / spec.interactions_per_user_per_span;
  return static_cast<std::int64_t>(std::floor(start + 0.1 * len + (j + 0.5) * step));
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SyntheticData out;

  const auto num_items = static_cast<std::size_t>(spec.num_items);
  auto& category = out.truth.item_category;
  category.resize(num_items);
  for (std::size_t i = 0; i < num_items; ++i) category[i] = static_cast<int>(i % spec.num_categories);
  std::shuffle(category.begin(), category.end(), rng);

  std::vector<std::vector<ItemId>> members(static_cast<std::size_t>(spec.num_categories));
  for (std::size_t i = 0; i < num_items; ++i) {
    members[static_cast<std::size_t>(category[i])].push_back(static_cast<ItemId>(i));
  }

  out.prototypes = make_prototypes(spec.num_categories, spec.dim, rng);
  out.item_embeddings = Matrix(num_items, static_cast<std::size_t>(spec.dim));
  std::normal_distribution<double> noise(0.0, spec.noise / std::sqrt(static_cast<double>(spec.dim)));
  for (std::size_t i = 0; i < num_items; ++i) {
    auto proto = out.prototypes.row(static_cast<std::size_t>(category[i]));
    auto row = out.item_embeddings.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = proto[k] + noise(rng);
  }

  const int total_spans = spec.spans + 1;
  const auto users = static_cast<std::size_t>(spec.num_users);
  out.truth.events.assign(users, std::vector<DriftEvents>(static_cast<std::size_t>(total_spans)));
  out.truth.active.assign(users, std::vector<std::vector<int>>(static_cast<std::size_t>(total_spans)));
  out.interactions.reserve(users * static_cast<std::size_t>(total_spans) *
                           static_cast<std::size_t>(spec.interactions_per_user_per_span));

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<int> all(static_cast<std::size_t>(spec.num_categories));
    for (int c = 0; c < spec.num_categories; ++c) all[static_cast<std::size_t>(c)] = c;
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t initial = std::min<std::size_t>(2, all.size());
    std::vector<int> active(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(initial));
    std::sort(active.begin(), active.end());
    out.truth.events[u][0].activated = active;

    for (int s = 0; s < total_spans; ++s) {
      auto& ev = out.truth.events[u][static_cast<std::size_t>(s)];
      if (s > 0) {
        // The drop candidate is chosen among categories active before this span's
        // activation, and a user always keeps at least one active category.
        const std::vector<int> before = active;
        if (coin(rng) < spec.p_new_category) {
          std::vector<int> inactive;
          for (int c = 0; c < spec.num_categories; ++c) {
            if (!std::binary_search(active.begin(), active.end(), c)) inactive.push_back(c);
          }
          if (!inactive.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, inactive.size() - 1);
            const int c = inactive[pick(rng)];
            active.insert(std::upper_bound(active.begin(), active.end(), c), c);
            ev.activated.push_back(c);
          }
        }
        if (coin(rng) < spec.p_drop_category && active.size() > 1) {
          std::uniform_int_distribution<std::size_t> pick(0, before.size() - 1);
          const int c = before[pick(rng)];
          active.erase(std::find(active.begin(), active.end(), c));
          ev.deactivated.push_back(c);
        }
      }
      out.truth.active[u][static_cast<std::size_t>(s)] = active;

      std::uniform_int_distribution<std::size_t> pick_cat(0, active.size() - 1);
      for (int j = 0; j < spec.interactions_per_user_per_span; ++j) {
        const auto& pool = members[static_cast<std::size_t>(active[pick_cat(rng)])];
        std::uniform_int_distribution<std::size_t> pick_item(0, pool.size() - 1);
        out.interactions.push_back({static_cast<UserId>(u), pool[pick_item(rng)], event_time(spec, s, j)});
      }
    }
  }
  return out;
}

void write_ground_truth(const std::filesystem::path& path, const DriftGroundTruth& truth) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (std::size_t u = 0; u < truth.events.size(); ++u) {
    nlohmann::ordered_json per_span = nlohmann::ordered_json::object();
    for (std::size_t s = 0; s < truth.events[u].size(); ++s) {
      per_span[std::to_string(s)] = {{"activated", truth.events[u][s].activated},
                                     {"deactivated", truth.events[u][s].deactivated}};
    }
    doc[std::to_string(u)] = std::move(per_span);
  }
  doc["item_category"] = truth.item_category;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write ground truth: " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failure on ground truth: " + path.string());
}

}  // namespace mintent
