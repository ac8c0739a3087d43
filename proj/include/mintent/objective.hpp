#pragma once

#include <span>
#include <vector>

#include "mintent/linalg.hpp"

namespace mintent {

// Per-instance training objective L = L_SS + lambda * L_KD and its hand-derived
// gradients. Quantities the objective treats as constants are explicit inputs:
// the last routing iteration's coupling coefficients (DR) and the teacher logits
// <h_k^{t-1}, e_a> computed from the frozen previous-span bank.
struct ObjectiveWeights {
  double lambda_kd = 0.0;
  double tau = 2.0;
};

struct HeadGrad {
  double loss = 0.0;
  double ss_loss = 0.0;
  double kd_loss = 0.0;
  Matrix d_intents;               // K x d
  std::vector<double> d_target;   // d
  Matrix d_negatives;             // m x d
};

// Aggregation, sampled softmax and distillation for fixed intents H. The first
// teacher_logits.size() intents take part in distillation.
HeadGrad head_backward(const Matrix& intents, std::span<const double> target, const Matrix& negatives,
                       std::span<const double> teacher_logits, const ObjectiveWeights& w);
double head_loss(const Matrix& intents, std::span<const double> target, const Matrix& negatives,
                 std::span<const double> teacher_logits, const ObjectiveWeights& w);

// Gradient of squash at s applied to an upstream gradient g.
std::vector<double> squash_backward(std::span<const double> s, std::span<const double> g);

// ---------------------------------------------------------------------------
// Dynamic routing. `transformed` holds W e_i per row; `coupling` (n x K) is constant.

struct DrGrad {
  HeadGrad head;
  Matrix d_transformed;  // n x d
};

DrGrad dr_backward(const Matrix& transformed, const Matrix& coupling, std::span<const double> target,
                   const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w);
double dr_loss(const Matrix& transformed, const Matrix& coupling, std::span<const double> target,
               const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w);

// ---------------------------------------------------------------------------
// Self-attention. `hidden` holds tanh(W1 e_i) per row; `queries` is W_u with one
// intent per row.

struct SaGrad {
  HeadGrad head;
  Matrix d_items;    // n x d, through H = E A only
  Matrix d_hidden;   // n x d_a
  Matrix d_queries;  // K x d_a
};

SaGrad sa_backward(const Matrix& items, const Matrix& hidden, const Matrix& queries, std::span<const double> target,
                   const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w);
double sa_loss(const Matrix& items, const Matrix& hidden, const Matrix& queries, std::span<const double> target,
               const Matrix& negatives, std::span<const double> teacher_logits, const ObjectiveWeights& w);

}  // namespace mintent
