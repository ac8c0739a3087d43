#include "mintent/optimizer.hpp"

#include <cassert>
#include <cmath>

#include "mintent/errors.hpp"
#include "mintent/linalg.hpp"

namespace mintent {

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& cfg) {
  assert(params.size() == grads.size() && m.size() == params.size() && v.size() == params.size());
  assert(step >= 1);
  if (!all_finite(grads)) throw TrainingError("non-finite gradient");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = to_float_precision(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g);
    v[i] = to_float_precision(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g);
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] = to_float_precision(params[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

}  // namespace mintent
