#include "mintent/bank.hpp"

#include <cassert>

namespace mintent {

double IntentBank::active_score(std::size_t k) const {
  return as_count[k] > 0 ? as_accum[k] / as_count[k] : 0.0;
}

void IntentBank::append_intent(std::span<const double> vector, int span,
                               std::span<const double> attention_row) {
  vectors.append_row(vector);
  creation_span.push_back(span);
  as_accum.push_back(0.0);
  as_count.push_back(0);
  if (!attention_row.empty()) {
    attention.append_row(attention_row);
    const std::vector<double> zeros(attention_row.size(), 0.0);
    attention_m.append_row(zeros);
    attention_v.append_row(zeros);
  }
  assert(consistent());
}

void IntentBank::erase_intent(std::size_t k) {
  vectors.erase_row(k);
  creation_span.erase(creation_span.begin() + static_cast<std::ptrdiff_t>(k));
  as_accum.erase(as_accum.begin() + static_cast<std::ptrdiff_t>(k));
  as_count.erase(as_count.begin() + static_cast<std::ptrdiff_t>(k));
  if (has_attention()) {
    attention.erase_row(k);
    attention_m.erase_row(k);
    attention_v.erase_row(k);
  }
}

void IntentBank::retain(const std::vector<bool>& keep) {
  assert(keep.size() == size());
  for (std::size_t k = keep.size(); k-- > 0;) {
    if (!keep[k]) erase_intent(k);
  }
}

bool IntentBank::consistent() const {
  const std::size_t k = size();
  if (creation_span.size() != k || as_accum.size() != k || as_count.size() != k) return false;
  if (attention.rows() != 0 || attention_m.rows() != 0 || attention_v.rows() != 0) {
    if (attention.rows() != k || attention_m.rows() != k || attention_v.rows() != k) return false;
  }
  return true;
}

}  // namespace mintent
