#pragma once

#include <atomic>
#include <complex>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace twinlat {

// natural units everywhere: lengths in lambda0, rates in gamma0, hbar = 1.
inline constexpr double pi = std::numbers::pi;
inline constexpr double k0 = 2.0 * pi;      // |k| of the transition, lambda0 = 1
inline constexpr double gamma0 = 1.0;       // single-atom decay rate

using cd = std::complex<double>;
inline constexpr cd iu{0.0, 1.0};

inline constexpr const char* version_string = "0.1.0";

// error taxonomy; the cli maps these onto exit codes 2/3/4
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Direction { forward, backward };

inline const char* to_string(Direction d) {
  return d == Direction::forward ? "forward" : "backward";
}

// worker count for embarrassingly parallel loops: TWINLAT_WORKERS, default 1
inline int worker_count() {
  if (const char* env = std::getenv("TWINLAT_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// run fn(0..n-1); results must go to pre-sized slots so ordering never
// depends on the worker count.  the first exception wins and is rethrown.
inline void parallel_for(int n, const std::function<void(int)>& fn, int workers) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int count = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace twinlat
