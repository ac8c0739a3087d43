#pragma once

#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mintent/bank.hpp"
#include "mintent/linalg.hpp"

namespace mintent {

struct LifecycleConfig {
  double tau = 2.0;
  double lambda_kd = 1e-3;
  // Gate fires when the mean puzzlement exceeds this value. Puzzlement is never
  // positive, so useful thresholds are negative; -infinity fires for every user.
  double theta_nid = -0.04;
  int delta_k = 3;
  double c2 = 0.3;
  int k_max = 20;
  int k0 = 4;

  void validate() const;  // throws ConfigError
};

// ---------------------------------------------------------------------------
// Existing-intents retention

// Probability clip applied to the student before taking logs.
inline constexpr double kKdClip = 1e-7;

// Sum over intents of CE(sigma(s_k / tau), sigma(t_k / tau)) with the teacher as the
// target distribution. `student` and `teacher` are raw logits <h_k, e_a>.
double kd_loss_from_logits(std::span<const double> student, std::span<const double> teacher, double tau);

// Uses the first teacher.rows() intents of `student`; the teacher is the previous
// span's bank and only intents that existed then take part.
double kd_loss(const Matrix& student, const Matrix& teacher, std::span<const double> target, double tau);

// ---------------------------------------------------------------------------
// New-intents detection

std::vector<double> intent_posterior(std::span<const double> item, const Matrix& intents);

// mean(x) - logsumexp(x) + ln K for logits x_k; equals -KL(uniform || softmax(x)).
double puzzlement_from_logits(std::span<const double> logits);
double puzzlement(std::span<const double> item, const Matrix& intents);

// Average puzzlement of the rows of `items` against the bank.
double mean_puzzlement(const Matrix& items, const Matrix& intents);

bool nid_gate(const Matrix& items, const Matrix& intents, double theta_nid);

// Appends delta_k intents drawn from N(0, I/d) created at `span`. When
// `attention_dim` > 0 each new intent also gets a query column drawn from
// N(0, 1/attention_dim). Returns the indices of the new intents.
std::vector<std::size_t> expand_intents(IntentBank& bank, int delta_k, int span, std::mt19937_64& rng,
                                        std::size_t attention_dim = 0);

// ---------------------------------------------------------------------------
// Projection-based trimming

// Component of `h` orthogonal to the row span of `existing` (K_old x d). Throws
// DataError when K_old >= d, since the residual is then identically zero.
std::vector<double> project_residual(std::span<const double> h, const Matrix& existing);

struct TrimResult {
  std::size_t kept = 0;
  std::size_t removed = 0;
};

// Replaces every listed intent by its residual against the intents not listed and
// deletes residuals whose L2 norm is below c2.
TrimResult trim_new_intents(IntentBank& bank, std::span<const std::size_t> new_indices, double c2);

// ---------------------------------------------------------------------------
// Elastic removal and compression

// Adds this span's mean posterior mass per intent to the accumulators and returns
// those means. An empty `items` leaves the bank untouched and returns {}.
std::vector<double> update_active_scores(IntentBank& bank, const Matrix& items);

// Deletes the K - k_max intents with the lowest active score (older creation span
// first on ties, then lower index). Returns removed indices in ascending order.
std::vector<std::size_t> remove_inactive(IntentBank& bank, int k_max);

// Labels of the connected components of the graph joining rows closer than `eps`
// (Euclidean). Labels are numbered by first member.
std::vector<int> epsilon_clusters(const Matrix& vectors, double eps);

inline constexpr int kMaxEpsilonHalvings = 10;

struct CompressionResult {
  bool compressed = false;  // false when K <= k_max
  bool fell_back = false;   // no epsilon on the ladder fit; remove_inactive was used
  double epsilon = 0.0;
  std::vector<int> labels;  // cluster of each pre-compression intent
};

// Merges intents within epsilon-connected components into their centroids, using the
// smallest epsilon in 1, 1/2, ..., 2^-10 that yields at most k_max clusters.
CompressionResult compress_similar(IntentBank& bank, int k_max);

}  // namespace mintent
