#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace voxlab {

/// Seeded random stream. All randomness in the library flows through this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

    /// Index i with probability proportional to weights[i] (nonnegative).
    std::size_t categorical(std::span<const double> weights);
    /// Index from a nondecreasing cumulative table whose last entry is the total.
    std::size_t from_cdf(std::span<const double> cdf);

    /// Independent child stream.
    Rng fork() { return Rng(next_u64()); }

    std::mt19937_64& engine() { return engine_; }

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

/// Runs fn(block, rng) for ceil(n / block_size) blocks, each with its own
/// stream derived from one draw of rng. Results are independent of the
/// number of worker threads (VOXLAB_THREADS, default 1).
void for_each_block(std::size_t n, std::size_t block_size, Rng& rng,
                    const std::function<void(std::size_t block, std::size_t begin, std::size_t end, Rng& block_rng)>& fn);

/// Worker count from VOXLAB_THREADS (>= 1).
unsigned worker_threads();

}  // namespace voxlab
