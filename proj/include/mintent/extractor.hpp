#pragma once

#include <span>
#include <vector>

#include "mintent/bank.hpp"
#include "mintent/linalg.hpp"

namespace mintent {

// Capsule nonlinearity: keeps the direction, maps the norm r to r^2 / (1 + r^2).
std::vector<double> squash(std::span<const double> v);

struct DrParams {
  Matrix transform;  // d x d, shared across users
};

struct SaParams {
  Matrix shared;  // d_a x d, shared across users; per-user queries live in IntentBank::attention
};

// Behaviour-to-intent dynamic routing over already transformed item capsules
// (n x d). Routing logits start at <e_i, init_k>; each iteration softmaxes them over
// intents per item, squashes the weighted sums and adds the agreement back. When
// `coupling` is given it receives the final iteration's n x K coefficients.
Matrix route(const Matrix& transformed, const Matrix& init, int iterations, Matrix* coupling = nullptr);

// Full extractor: transforms raw item embeddings (n x d) with W, then routes.
Matrix extract_dr(const Matrix& items, const Matrix& init, const DrParams& params, int iterations,
                  Matrix* coupling = nullptr);
inline Matrix extract_dr(const Matrix& items, const IntentBank& bank, const DrParams& params, int iterations) {
  return extract_dr(items, bank.vectors, params, iterations);
}

// Routing with fixed coefficients: h_k = squash(sum_i c_ik e_i). Used where the
// coefficients of the last routing iteration are held constant.
Matrix route_fixed(const Matrix& transformed, const Matrix& coupling);

// Self-attention over precomputed hidden activations tanh(W1 e_i) (n x d_a).
// Attention is softmaxed over items for each intent; the result is H = E A, one
// intent per row. `attention_out` receives A as n x K.
Matrix attend(const Matrix& items, const Matrix& hidden, const Matrix& queries, Matrix* attention_out = nullptr);

Matrix hidden_activations(const Matrix& items, const SaParams& params);

Matrix extract_sa(const Matrix& items, const SaParams& params, const Matrix& queries,
                  Matrix* attention_out = nullptr);

}  // namespace mintent
