#include "mintent/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mintent/errors.hpp"

namespace mintent {

void LifecycleConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("lifecycle: ") + what);
  };
  require(tau > 0.0, "tau must be > 0");
  require(lambda_kd >= 0.0, "lambda_kd must be >= 0");
  require(!std::isnan(theta_nid), "theta_nid must not be NaN");
  require(delta_k >= 1, "delta_k must be >= 1");
  require(c2 > 0.0, "c2 must be > 0");
  require(k_max >= 1, "k_max must be >= 1");
  require(k0 >= 1, "k0 must be >= 1");
}

double kd_loss_from_logits(std::span<const double> student, std::span<const double> teacher, double tau) {
  double loss = 0.0;
  for (std::size_t k = 0; k < teacher.size(); ++k) {
    const double p = std::clamp(sigmoid(student[k] / tau), kKdClip, 1.0 - kKdClip);
    const double q = sigmoid(teacher[k] / tau);
    loss -= q * std::log(p) + (1.0 - q) * std::log(1.0 - p);
  }
  return loss;
}

double kd_loss(const Matrix& student, const Matrix& teacher, std::span<const double> target, double tau) {
  std::vector<double> s(teacher.rows()), t(teacher.rows());
  for (std::size_t k = 0; k < teacher.rows(); ++k) {
    s[k] = dot(student.row(k), target);
    t[k] = dot(teacher.row(k), target);
  }
  return kd_loss_from_logits(s, t, tau);
}

std::vector<double> intent_posterior(std::span<const double> item, const Matrix& intents) {
  std::vector<double> p(intents.rows());
  for (std::size_t k = 0; k < intents.rows(); ++k) p[k] = dot(item, intents.row(k));
  softmax_inplace(p);
  return p;
}

double puzzlement_from_logits(std::span<const double> logits) {
  const double k = static_cast<double>(logits.size());
  double mean = 0.0;
  for (double x : logits) mean += x;
  mean /= k;
  // Subtracting the mean first keeps equal logits at exactly zero.
  double mx = logits[0] - mean;
  for (double x : logits) mx = std::max(mx, x - mean);
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - mean - mx);
  return -(mx + std::log(sum)) + std::log(k);
}

double puzzlement(std::span<const double> item, const Matrix& intents) {
  std::vector<double> x(intents.rows());
  for (std::size_t k = 0; k < intents.rows(); ++k) x[k] = dot(item, intents.row(k));
  return puzzlement_from_logits(x);
}

double mean_puzzlement(const Matrix& items, const Matrix& intents) {
  double total = 0.0;
  for (std::size_t i = 0; i < items.rows(); ++i) total += puzzlement(items.row(i), intents);
  return total / static_cast<double>(items.rows());
}

bool nid_gate(const Matrix& items, const Matrix& intents, double theta_nid) {
  return mean_puzzlement(items, intents) > theta_nid;
}

std::vector<std::size_t> expand_intents(IntentBank& bank, int delta_k, int span, std::mt19937_64& rng,
                                        std::size_t attention_dim) {
  const std::size_t d = bank.dim();
  std::normal_distribution<double> intent_init(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<std::size_t> added;
  std::vector<double> h(d);
  std::vector<double> query(attention_dim);
  for (int j = 0; j < delta_k; ++j) {
    for (double& v : h) v = to_float_precision(intent_init(rng));
    if (attention_dim > 0) {
      std::normal_distribution<double> query_init(0.0, 1.0 / std::sqrt(static_cast<double>(attention_dim)));
      for (double& v : query) v = to_float_precision(query_init(rng));
    }
    added.push_back(bank.size());
    bank.append_intent(h, span, query);
  }
  return added;
}

std::vector<double> project_residual(std::span<const double> h, const Matrix& existing) {
  const std::size_t d = h.size();
  if (existing.rows() == 0) throw DataError("projection needs at least one existing intent");
  if (existing.rows() >= d) {
    throw DataError("projection onto " + std::to_string(existing.rows()) + " intents in dimension " +
                    std::to_string(d) + " spans the whole space; residual would be zero");
  }

  // Modified Gram-Schmidt with column pivoting by norm and a second orthogonalisation
  // pass; columns whose remainder falls under the tolerance are rank deficient.
  double largest = 0.0;
  for (std::size_t j = 0; j < existing.rows(); ++j) largest = std::max(largest, norm2(existing.row(j)));
  const double tol = 1e-8 * largest;

  std::vector<std::vector<double>> pending;
  for (std::size_t j = 0; j < existing.rows(); ++j) pending.emplace_back(existing.row(j).begin(), existing.row(j).end());
  std::vector<std::vector<double>> basis;
  while (!pending.empty()) {
    auto pivot = std::max_element(pending.begin(), pending.end(),
                                  [](const auto& a, const auto& b) { return norm2(a) < norm2(b); });
    std::vector<double> q = std::move(*pivot);
    pending.erase(pivot);
    if (norm2(q) <= tol) break;  // remaining columns are all below tolerance
    const double n = norm2(q);
    for (double& v : q) v /= n;
    for (auto& col : pending) {
      for (int pass = 0; pass < 2; ++pass) axpy(-dot(q, col), q, col);
    }
    basis.push_back(std::move(q));
  }

  std::vector<double> r(h.begin(), h.end());
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) axpy(-dot(q, r), q, r);
  }
  return r;
}

TrimResult trim_new_intents(IntentBank& bank, std::span<const std::size_t> new_indices, double c2) {
  std::vector<bool> is_new(bank.size(), false);
  for (std::size_t k : new_indices) is_new[k] = true;

  Matrix existing;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    if (!is_new[k]) existing.append_row(bank.vectors.row(k));
  }

  std::vector<bool> keep(bank.size(), true);
  TrimResult result;
  for (std::size_t k : new_indices) {
    auto r = project_residual(bank.vectors.row(k), existing);
    round_to_float(r);
    std::copy(r.begin(), r.end(), bank.vectors.row(k).begin());
    if (norm2(r) < c2) {
      keep[k] = false;
      ++result.removed;
    } else {
      ++result.kept;
    }
  }
  bank.retain(keep);
  return result;
}

std::vector<double> update_active_scores(IntentBank& bank, const Matrix& items) {
  if (items.rows() == 0) return {};
  std::vector<double> means(bank.size(), 0.0);
  for (std::size_t i = 0; i < items.rows(); ++i) {
    const auto p = intent_posterior(items.row(i), bank.vectors);
    for (std::size_t k = 0; k < p.size(); ++k) means[k] += p[k];
  }
  for (std::size_t k = 0; k < means.size(); ++k) {
    means[k] /= static_cast<double>(items.rows());
    bank.as_accum[k] += means[k];
    bank.as_count[k] += 1;
  }
  return means;
}

std::vector<std::size_t> remove_inactive(IntentBank& bank, int k_max) {
  const std::size_t cap = static_cast<std::size_t>(k_max);
  if (bank.size() <= cap) return {};
  std::vector<std::size_t> order(bank.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = bank.active_score(a), sb = bank.active_score(b);
    if (sa != sb) return sa < sb;
    return bank.creation_span[a] < bank.creation_span[b];
  });
  std::vector<std::size_t> removed(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(bank.size() - cap));
  std::sort(removed.begin(), removed.end());
  std::vector<bool> keep(bank.size(), true);
  for (std::size_t k : removed) keep[k] = false;
  bank.retain(keep);
  return removed;
}

std::vector<int> epsilon_clusters(const Matrix& vectors, double eps) {
  const std::size_t n = vectors.rows();
  std::vector<int> label(n, -1);
  std::vector<std::size_t> frontier;
  int next = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (label[seed] >= 0) continue;
    label[seed] = next;
    frontier.assign(1, seed);
    while (!frontier.empty()) {
      const std::size_t cur = frontier.back();
      frontier.pop_back();
      for (std::size_t j = 0; j < n; ++j) {
        if (label[j] >= 0) continue;
        double sq = 0.0;
        for (std::size_t c = 0; c < vectors.cols(); ++c) {
          const double diff = vectors(cur, c) - vectors(j, c);
          sq += diff * diff;
        }
        if (std::sqrt(sq) < eps) {
          label[j] = next;
          frontier.push_back(j);
        }
      }
    }
    ++next;
  }
  return label;
}

namespace {

Matrix centroid_rows(const Matrix& rows, const std::vector<int>& labels, int clusters) {
  Matrix out(static_cast<std::size_t>(clusters), rows.cols());
  std::vector<double> count(static_cast<std::size_t>(clusters), 0.0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    axpy(1.0, rows.row(i), out.row(static_cast<std::size_t>(labels[i])));
    count[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  for (std::size_t c = 0; c < out.rows(); ++c) {
    for (double& v : out.row(c)) v = to_float_precision(v / count[c]);
  }
  return out;
}

}  // namespace

CompressionResult compress_similar(IntentBank& bank, int k_max) {
  CompressionResult result;
  const std::size_t cap = static_cast<std::size_t>(k_max);
  if (bank.size() <= cap) return result;

  std::vector<int> chosen;
  double eps = 1.0;
  for (int halving = 0; halving <= kMaxEpsilonHalvings; ++halving, eps /= 2.0) {
    auto labels = epsilon_clusters(bank.vectors, eps);
    const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    if (static_cast<std::size_t>(clusters) > cap) break;
    chosen = std::move(labels);
    result.epsilon = eps;
  }

  result.compressed = true;
  if (chosen.empty()) {
    result.fell_back = true;
    remove_inactive(bank, k_max);
    return result;
  }

  const int clusters = *std::max_element(chosen.begin(), chosen.end()) + 1;
  const auto uc = static_cast<std::size_t>(clusters);
  IntentBank merged;
  merged.vectors = centroid_rows(bank.vectors, chosen, clusters);
  merged.creation_span.assign(uc, 0);
  merged.as_accum.assign(uc, 0.0);
  merged.as_count.assign(uc, 0);
  std::vector<double> score_sum(uc, 0.0), members(uc, 0.0);
  std::vector<bool> seen(uc, false);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto c = static_cast<std::size_t>(chosen[i]);
    merged.creation_span[c] = seen[c] ? std::min(merged.creation_span[c], bank.creation_span[i]) : bank.creation_span[i];
    merged.as_count[c] = std::max(merged.as_count[c], bank.as_count[i]);
    score_sum[c] += bank.active_score(i);
    members[c] += 1.0;
    seen[c] = true;
  }
  // The merged intent is as old as its oldest member and carries the members' mean
  // active score.
  for (std::size_t c = 0; c < uc; ++c) merged.as_accum[c] = score_sum[c] / members[c] * merged.as_count[c];

  if (bank.has_attention()) {
    merged.attention = centroid_rows(bank.attention, chosen, clusters);
    merged.attention_m = centroid_rows(bank.attention_m, chosen, clusters);
    merged.attention_v = centroid_rows(bank.attention_v, chosen, clusters);
  }
  merged.prev_vectors = std::move(bank.prev_vectors);
  bank = std::move(merged);
  result.labels = std::move(chosen);
  return result;
}

}  // namespace mintent
