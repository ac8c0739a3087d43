#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace mintent {

// Kernels that accept this run either a plain loop (the reference path used by
// tests) or an OpenMP loop. Both write per-item results to fixed slots and reduce
// them in index order, so their outputs are bitwise identical.
enum class Execution { serial, parallel };

int max_threads();

// Runs fn(i) for i in [0, n). Exceptions cannot cross an OpenMP region, so they are
// captured per index and the lowest-index one is rethrown afterwards.
template <class F>
void for_each_index(std::size_t n, Execution exec, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
  auto body = [&](std::ptrdiff_t i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mintent
