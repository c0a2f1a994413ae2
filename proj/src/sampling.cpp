#include "clf_etc/sampling.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace clf_etc {
namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                           37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};

double radical_inverse(std::size_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double hashed_uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t index) {
  const std::uint64_t h =
      splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Eigen::VectorXd halton_point(std::size_t index, int dim, std::uint64_t seed) {
  Eigen::VectorXd p(dim);
  for (int j = 0; j < dim; ++j) {
    const int base = kPrimes[j % (sizeof(kPrimes) / sizeof(int))];
    const double shift = hashed_uniform(seed, 0x4841'4c54ULL, j);
    double v = radical_inverse(index + 1, base) + shift;
    p[j] = v - std::floor(v);
  }
  return p;
}

Eigen::VectorXd hashed_direction(int dim, std::uint64_t seed,
                                 std::uint64_t stream, std::uint64_t index) {
  Eigen::VectorXd d(dim);
  for (;;) {
    for (int j = 0; j < dim; ++j) {
      // Box-Muller on two hashed uniforms per coordinate.
      const double u1 = hashed_uniform(seed, stream, 2 * (index * 64 + j));
      const double u2 = hashed_uniform(seed, stream, 2 * (index * 64 + j) + 1);
      d[j] = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
    }
    const double n = d.norm();
    if (n > 1e-12) return d / n;
    index += 0x1000;
  }
}

unsigned worker_count() {
  if (const char* env = std::getenv("CLF_ETC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned workers) {
  if (workers == 0) workers = worker_count();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failure_index = n;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          // Report the lowest failing index, as a serial loop would.
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (i < failure_index) {
            failure_index = i;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace clf_etc
