#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace clf_etc {

/// Counter-based 64-bit mixer; hash(seed, i) gives reproducible per-index
/// randomness independent of evaluation order.
std::uint64_t splitmix64(std::uint64_t x);

/// Uniform double in [0, 1) derived from (seed, stream, index).
double hashed_uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t index);

/// Point `index` of the dim-dimensional Halton sequence with a seeded
/// Cranley-Patterson rotation, in [0, 1)^dim. The first n points of a
/// sequence are independent of how many more are drawn later.
Eigen::VectorXd halton_point(std::size_t index, int dim, std::uint64_t seed);

/// Unit vector derived from (seed, stream, index) via Gaussian coordinates.
Eigen::VectorXd hashed_direction(int dim, std::uint64_t seed,
                                 std::uint64_t stream, std::uint64_t index);

/// Worker count: CLF_ETC_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
unsigned worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; callers store results by index so the outcome
/// does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned workers = 0);

}  // namespace clf_etc
