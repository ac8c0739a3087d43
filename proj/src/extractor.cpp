#include "mintent/extractor.hpp"

#include <cassert>
#include <cmath>

namespace mintent {

std::vector<double> squash(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  const double sq = dot(v, v);
  if (sq == 0.0) return out;
  const double scale = std::sqrt(sq) / (1.0 + sq);
  for (double& x : out) x *= scale;
  return out;
}

Matrix route(const Matrix& transformed, const Matrix& init, int iterations, Matrix* coupling) {
  assert(iterations >= 1);
  const std::size_t n = transformed.rows();
  const std::size_t k_count = init.rows();
  const std::size_t d = transformed.cols();

  Matrix logits(n, k_count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_count; ++k) logits(i, k) = dot(transformed.row(i), init.row(k));
  }

  Matrix coeff(n, k_count);
  Matrix intents(k_count, d);
  std::vector<double> sum(d);
  for (int it = 0; it < iterations; ++it) {
    coeff = logits;
    for (std::size_t i = 0; i < n; ++i) softmax_inplace(coeff.row(i));
    for (std::size_t k = 0; k < k_count; ++k) {
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) axpy(coeff(i, k), transformed.row(i), sum);
      const auto h = squash(sum);
      std::copy(h.begin(), h.end(), intents.row(k).begin());
    }
    if (it + 1 < iterations) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < k_count; ++k) logits(i, k) += dot(transformed.row(i), intents.row(k));
      }
    }
  }
  if (coupling) *coupling = std::move(coeff);
  return intents;
}

Matrix extract_dr(const Matrix& items, const Matrix& init, const DrParams& params, int iterations,
                  Matrix* coupling) {
  Matrix transformed(items.rows(), params.transform.rows());
  for (std::size_t i = 0; i < items.rows(); ++i) matvec(params.transform, items.row(i), transformed.row(i));
  return route(transformed, init, iterations, coupling);
}

Matrix route_fixed(const Matrix& transformed, const Matrix& coupling) {
  const std::size_t d = transformed.cols();
  Matrix intents(coupling.cols(), d);
  std::vector<double> sum(d);
  for (std::size_t k = 0; k < coupling.cols(); ++k) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t i = 0; i < transformed.rows(); ++i) axpy(coupling(i, k), transformed.row(i), sum);
    const auto h = squash(sum);
    std::copy(h.begin(), h.end(), intents.row(k).begin());
  }
  return intents;
}

Matrix hidden_activations(const Matrix& items, const SaParams& params) {
  Matrix hidden(items.rows(), params.shared.rows());
  for (std::size_t i = 0; i < items.rows(); ++i) {
    matvec(params.shared, items.row(i), hidden.row(i));
    for (double& v : hidden.row(i)) v = std::tanh(v);
  }
  return hidden;
}

Matrix attend(const Matrix& items, const Matrix& hidden, const Matrix& queries, Matrix* attention_out) {
  const std::size_t n = items.rows();
  const std::size_t k_count = queries.rows();
  Matrix intents(k_count, items.cols());
  Matrix attn(n, k_count);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = dot(queries.row(k), hidden.row(i));
    softmax_inplace(column);
    for (std::size_t i = 0; i < n; ++i) {
      attn(i, k) = column[i];
      axpy(column[i], items.row(i), intents.row(k));
    }
  }
  if (attention_out) *attention_out = std::move(attn);
  return intents;
}

Matrix extract_sa(const Matrix& items, const SaParams& params, const Matrix& queries, Matrix* attention_out) {
  return attend(items, hidden_activations(items, params), queries, attention_out);
}

}  // namespace mintent
