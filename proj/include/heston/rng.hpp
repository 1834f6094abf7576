#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace heston {

/// splitmix64 finalizer; used to spread (seed, stream) pairs over the
/// mt19937_64 seed space so neighbouring stream ids decorrelate.
std::uint64_t mix64(std::uint64_t z);

/// One Gaussian stream per path.  The state depends only on (seed,
/// stream_id), never on thread assignment or total path count, so runs
/// reproduce bit-for-bit under any partitioning.
class PathRng {
  public:
    PathRng(std::uint64_t seed, std::uint64_t stream_id)
        : engine_(mix64(seed ^ mix64(stream_id * 0x9E3779B97F4A7C15ULL + 1))) {}
    double gauss() { return normal_(engine_); }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Fixed-order pairwise reduction; the result is independent of thread
/// count because it is always applied to the full, ordered array.
double pairwise_sum(std::span<const double> v);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and standard error via pairwise sums.
MeanSe mean_se(std::span<const double> v);

}  // namespace heston
