#include "mintent/objective.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "mintent/extractor.hpp"
#include "mintent/lifecycle.hpp"
#include "mintent/scoring.hpp"

namespace mintent {

double head_loss(const Matrix& intents, std::span<const double> target, const Matrix& negatives,
                 std::span<const double> teacher_logits, const ObjectiveWeights& w) {
  double loss = sampled_softmax_loss(intents, target, negatives);
  if (w.lambda_kd != 0.0 && !teacher_logits.empty()) {
    std::vector<double> student(teacher_logits.size());
    for (std::size_t k = 0; k < student.size(); ++k) student[k] = dot(intents.row(k), target);
    loss += w.lambda_kd * kd_loss_from_logits(student, teacher_logits, w.tau);
  }
  return loss;
}

HeadGrad head_backward(const Matrix& intents, std::span<const double> target, const Matrix& negatives,
                       std::span<const double> teacher_logits, const ObjectiveWeights& w) {
  const std::size_t k_count = intents.rows();
  const std::size_t d = intents.cols();
  const std::size_t m = negatives.rows();
  HeadGrad g;
  g.d_intents = Matrix(k_count, d);
  g.d_target.assign(d, 0.0);
  g.d_negatives = Matrix(m, d);

  // Forward: x_k = <e_a, h_k>, beta = softmax(x), v = sum beta_k h_k.
  std::vector<double> x(k_count);
  for (std::size_t k = 0; k < k_count; ++k) x[k] = dot(target, intents.row(k));
  std::vector<double> beta = x;
  softmax_inplace(beta);
  std::vector<double> v(d, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) axpy(beta[k], intents.row(k), v);

  // Logits z_0 = <v, e_a>, z_j = <v, n_j>; L_SS = logsumexp(z) - z_0.
  std::vector<double> z(m + 1);
  z[0] = dot(v, target);
  for (std::size_t j = 0; j < m; ++j) z[j + 1] = dot(v, negatives.row(j));
  g.ss_loss = sampled_softmax_from_logits(z[0], std::span<const double>(z).subspan(1));
  std::vector<double> p = z;
  softmax_inplace(p);

  std::vector<double> dv(d, 0.0);
  axpy(p[0] - 1.0, target, dv);
  axpy(p[0] - 1.0, v, g.d_target);
  for (std::size_t j = 0; j < m; ++j) {
    axpy(p[j + 1], negatives.row(j), dv);
    axpy(p[j + 1], v, g.d_negatives.row(j));
  }

  // Through v = sum beta_k h_k and beta = softmax(x).
  std::vector<double> dbeta(k_count);
  double mean_dbeta = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    axpy(beta[k], dv, g.d_intents.row(k));
    dbeta[k] = dot(intents.row(k), dv);
    mean_dbeta += beta[k] * dbeta[k];
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    const double dx = beta[k] * (dbeta[k] - mean_dbeta);
    axpy(dx, target, g.d_intents.row(k));
    axpy(dx, intents.row(k), g.d_target);
  }

  if (w.lambda_kd != 0.0 && !teacher_logits.empty()) {
    assert(teacher_logits.size() <= k_count);
    std::vector<double> student(teacher_logits.size());
    for (std::size_t k = 0; k < student.size(); ++k) student[k] = x[k];
    g.kd_loss = kd_loss_from_logits(student, teacher_logits, w.tau);
    for (std::size_t k = 0; k < student.size(); ++k) {
      const double raw = sigmoid(student[k] / w.tau);
      if (raw < kKdClip || raw > 1.0 - kKdClip) continue;  // clipped: flat
      const double q = sigmoid(teacher_logits[k] / w.tau);
      const double ds = w.lambda_kd * (raw - q) / w.tau;
      axpy(ds, target, g.d_intents.row(k));
      axpy(ds, intents.row(k), g.d_target);
    }
  }
  g.loss = g.ss_loss + w.lambda_kd * g.kd_loss;
  return g;
}

std::vector<double> squash_backward(std::span<const double> s, std::span<const double> g) {
  std::vector<double> out(s.size(), 0.0);
  const double sq = dot(s, s);
  if (sq == 0.0) return out;
  const double r = std::sqrt(sq);
  const double denom = 1.0 + sq;
  const double f = r / denom;
  const double fprime_over_r = (1.0 - sq) / (denom * denom) / r;
  const double sg = dot(s, g);
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = f * g[i] + fprime_over_r * sg * s[i];
  return out;
}

namespace {

Matrix weighted_sums(const Matrix& rows, const Matrix& coupling) {
  Matrix sums(coupling.cols(), rows.cols());
  for (std::size_t k = 0; k < coupling.cols(); ++k) {
    for (std::size_t i = 0; i < rows.rows(); ++i) axpy(coupling(i, k), rows.row(i), sums.row(k));
  }
  return sums;
}

}  // namespace

double dr_loss(const Matrix& transformed, const Matrix& coupling, std::span<const double> target,
               const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w) {
  return head_loss(route_fixed(transformed, coupling), target, negatives, teacher_logits, w);
}

DrGrad dr_backward(const Matrix& transformed, const Matrix& coupling, std::span<const double> target,
                   const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w) {
  const Matrix sums = weighted_sums(transformed, coupling);
  Matrix intents(sums.rows(), sums.cols());
  for (std::size_t k = 0; k < sums.rows(); ++k) {
    const auto h = squash(sums.row(k));
    std::copy(h.begin(), h.end(), intents.row(k).begin());
  }
  DrGrad g;
  g.head = head_backward(intents, target, negatives, teacher_logits, w);
  g.d_transformed = Matrix(transformed.rows(), transformed.cols());
  for (std::size_t k = 0; k < sums.rows(); ++k) {
    const auto ds = squash_backward(sums.row(k), g.head.d_intents.row(k));
    for (std::size_t i = 0; i < transformed.rows(); ++i) axpy(coupling(i, k), ds, g.d_transformed.row(i));
  }
  return g;
}

double sa_loss(const Matrix& items, const Matrix& hidden, const Matrix& queries, std::span<const double> target,
               const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w) {
  return head_loss(attend(items, hidden, queries), target, negatives, teacher_logits, w);
}

SaGrad sa_backward(const Matrix& items, const Matrix& hidden, const Matrix& queries, std::span<const double> target,
                   const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w) {
  const std::size_t n = items.rows();
  const std::size_t k_count = queries.rows();
  Matrix attn;
  const Matrix intents = attend(items, hidden, queries, &attn);

  SaGrad g;
  g.head = head_backward(intents, target, negatives, teacher_logits, w);
  g.d_items = Matrix(n, items.cols());
  g.d_hidden = Matrix(n, hidden.cols());
  g.d_queries = Matrix(k_count, queries.cols());

  std::vector<double> d_attn(n);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto dh = g.head.d_intents.row(k);
    // h_k = sum_i A_ik e_i
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d_attn[i] = dot(items.row(i), dh);
      weighted += attn(i, k) * d_attn[i];
      axpy(attn(i, k), dh, g.d_items.row(i));
    }
    // A_.k = softmax_i(<w_k, z_i>)
    for (std::size_t i = 0; i < n; ++i) {
      const double dscore = attn(i, k) * (d_attn[i] - weighted);
      axpy(dscore, hidden.row(i), g.d_queries.row(k));
      axpy(dscore, queries.row(k), g.d_hidden.row(i));
    }
  }
  return g;
}

}  // namespace mintent
