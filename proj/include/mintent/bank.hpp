#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mintent/linalg.hpp"

namespace mintent {

// Per-user variable-size set of intent vectors plus per-intent bookkeeping. Every
// per-intent array (vectors, creation_span, active-score accumulators and, for the
// self-attention extractor, the user's query columns with their Adam moments) is kept
// row-aligned; the editing helpers below are the only way intents are added or removed.
struct IntentBank {
  Matrix vectors;                  // K x d
  std::vector<int> creation_span;  // span index at which each intent was created
  std::vector<double> as_accum;    // running sum of per-span mean posterior mass
  std::vector<int> as_count;       // spans accumulated into as_accum
  Matrix prev_vectors;             // teacher snapshot from the end of the previous span

  // Self-attention only: per-user query matrix W_u stored one intent per row (K x d_a),
  // and its Adam first/second moments.
  Matrix attention;
  Matrix attention_m;
  Matrix attention_v;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
  bool empty() const { return vectors.rows() == 0; }
  bool has_attention() const { return attention.rows() > 0; }

  // as_accum / as_count, or 0 for intents that have not been scored yet.
  double active_score(std::size_t k) const;

  // Appends one intent; `attention_row` must be empty unless the bank carries queries.
  void append_intent(std::span<const double> vector, int span, std::span<const double> attention_row = {});
  void erase_intent(std::size_t k);
  // Keeps intents whose flag is true, preserving order.
  void retain(const std::vector<bool>& keep);

  void snapshot_teacher() { prev_vectors = vectors; }

  // True when all per-intent arrays agree in length.
  bool consistent() const;
};

}  // namespace mintent
