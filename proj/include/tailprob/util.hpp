#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace tailprob {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Rate-function value assigned to parameters outside the support of a
/// measure. Rate functions check support before evaluating, so a returned
/// infinity always means "out of support", never arithmetic overflow.
inline constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();

inline bool is_infinite_rate(double r) { return std::isinf(r) && r > 0.0; }

/// Error raised when the water column becomes nonpositive somewhere.
class PositivityError : public std::runtime_error {
 public:
  PositivityError(int element, double time, double value)
      : std::runtime_error("water height nonpositive in element " +
                           std::to_string(element) + " at t=" +
                           std::to_string(time) + " (h=" +
                           std::to_string(value) + ")"),
        element(element), time(time), value(value) {}
  int element;
  double time;
  double value;
};

/// Numerical failure of a solver (CFL blow-up, non-convergence, ...).
class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Configuration or schema problem; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SplitMix64; used to derive independent per-sample seeds from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x51ed2701a3b5f0c9ULL));
}

// FNV-1a over a byte string; used for config hashes in run manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written
/// to per-index slots by the caller so reductions stay deterministic.
/// workers == 0 picks hardware_concurrency().
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tailprob
