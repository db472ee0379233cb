#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include "bypass/exec.hpp"

namespace bypass::detail {

/// Runs body(i) for i in [0, n), across OpenMP threads when exec is
/// Parallel. An exception escaping an iteration is rethrown on the calling
/// thread after the loop; the one from the lowest index wins.
template <class Body>
void parallel_for(std::ptrdiff_t n, Exec exec, Body&& body, bool dynamic = false) {
  std::exception_ptr error;
  std::ptrdiff_t error_index = n;
  std::mutex guard;
  auto run = [&](std::ptrdiff_t i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(guard);
      if (i < error_index) {
        error_index = i;
        error = std::current_exception();
      }
    }
  };
  if (dynamic) {
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) run(i);
  } else {
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) run(i);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace bypass::detail
