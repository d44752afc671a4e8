#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace ice {

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

// All randomness in the pipeline flows through this engine so that every
// stage is reproducible from a 64-bit seed on a given build.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Samples an index from an unnormalized nonnegative weight vector.
template <typename Derived>
int sample_index(const Eigen::MatrixBase<Derived>& weights, Rng& rng) {
  const double total = weights.sum();
  double u = uniform01(rng) * total;
  const int n = static_cast<int>(weights.size());
  for (int i = 0; i < n; ++i) {
    u -= static_cast<double>(weights(i));
    if (u < 0.0) return i;
  }
  // Floating-point slack: return the last index with positive weight.
  for (int i = n - 1; i >= 0; --i) {
    if (weights(i) > 0) return i;
  }
  return n - 1;
}

// FNV-1a over bytes; stable across platforms.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed = stable hash of (root seed, stage, task id).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                 std::string_view task_id = {}) {
  std::uint64_t h = fnv1a64(stage, splitmix64(root));
  h = fnv1a64("|", h);
  h = fnv1a64(task_id, h);
  return splitmix64(h);
}

std::string hex64(std::uint64_t v);

// "%.17g" formatting used by every text persistence format.
std::string format_double(double v);

std::vector<std::string> split(std::string_view s, char sep);

// Runs fn(job) for job in [0, n) over `workers` threads; results are written
// by index so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, std::min<int>(workers, static_cast<int>(n))));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ice
