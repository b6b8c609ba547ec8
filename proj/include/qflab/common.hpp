#pragma once

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qflab {

// Thrown when an estimator exhausts its work budget before reaching the
// requested tolerance. Carries the best value obtained so far.
class budget_error : public std::runtime_error {
 public:
  budget_error(const std::string& what, double partial, double err_estimate)
      : std::runtime_error(what), partial_(partial), err_(err_estimate) {}
  double partial_value() const { return partial_; }
  double error_estimate() const { return err_; }

 private:
  double partial_;
  double err_;
};

// Thrown when a sample grid cannot resolve the structure it is asked to hold.
class resolution_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when two objects built over different discretizations are combined.
class mismatch_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when an ODE integrator detects loss of unitarity at the current step
// size.
class step_size_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* version() { return "0.1.0"; }

// FNV-1a, used for content hashes in run manifests. Stable across platforms,
// which std::hash is not.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(s.data(), s.size());
}

// Worker cap for embarrassingly parallel sweeps. Aggregation is always in
// index order, so results do not depend on the thread count.
inline unsigned worker_threads() {
  if (const char* env = std::getenv("QFLAB_THREADS")) {
    long n = std::strtol(env, nullptr, 10);
    if (n >= 1 && n <= 256) return static_cast<unsigned>(n);
  }
  return 1;
}

// Runs fn(i) for i in [0, n) on up to worker_threads() threads. fn must only
// write to its own slot of any shared output. The first exception thrown by
// any worker is rethrown on the calling thread.
inline void indexed_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned workers = worker_threads();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex mu;
  std::exception_ptr first;
  std::size_t stride = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * stride, hi = std::min(n, lo + stride);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn, &mu, &first] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace qflab
