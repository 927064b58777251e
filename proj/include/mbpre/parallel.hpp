#pragma once

#include <cstdint>
#include <exception>

#include <omp.h>

namespace mbpre {

// Runs fn(r) for r in [0, count) on the OpenMP team. Work items must only
// write to slots owned by r; callers reduce afterwards in index order, which
// keeps results independent of the thread count. The first exception thrown
// by any item is rethrown on the calling thread.
template <class Fn>
void parallel_for_replicas(std::int64_t count, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t r = 0; r < count; ++r) {
    try {
      fn(r);
    } catch (...) {
#pragma omp critical(mbpre_replica_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

inline int worker_count() { return omp_get_max_threads(); }
inline void set_worker_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace mbpre
