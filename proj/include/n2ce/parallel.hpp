#ifndef N2CE_PARALLEL_HPP
#define N2CE_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace n2ce {

/// Worker count: N2CE_THREADS if set and positive, else hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("N2CE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(i) for i in [0, count). Each index is handled exactly once;
/// callers write results into slot i, so the outcome does not depend on the
/// thread count. The first exception thrown by any body is rethrown.
template <typename Body>
void parallel_for(long count, int threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  const int workers = static_cast<int>(std::min<long>(threads, count));
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (long i = w; i < count; i += workers) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace n2ce

#endif  // N2CE_PARALLEL_HPP
