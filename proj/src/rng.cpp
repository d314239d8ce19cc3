#include "voxlab/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace voxlab {

std::size_t Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += std::max(w, 0.0);
    double u = uniform() * total;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double w = std::max(weights[i], 0.0);
        if (w <= 0.0) continue;
        last_positive = i;
        if (u < w) return i;
        u -= w;
    }
    return last_positive;
}

std::size_t Rng::from_cdf(std::span<const double> cdf) {
    double u = uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it != cdf.end()) return static_cast<std::size_t>(it - cdf.begin());
    // u landed on the total; back off to the last entry with mass
    std::size_t i = cdf.size() - 1;
    while (i > 0 && cdf[i] == cdf[i - 1]) --i;
    return i;
}

unsigned worker_threads() {
    const char* env = std::getenv("VOXLAB_THREADS");
    if (env == nullptr) return 1;
    try {
        int v = std::stoi(env);
        return v < 1 ? 1u : static_cast<unsigned>(v);
    } catch (...) {
        return 1;
    }
}

void for_each_block(std::size_t n, std::size_t block_size, Rng& rng,
                    const std::function<void(std::size_t, std::size_t, std::size_t, Rng&)>& fn) {
    if (n == 0) return;
    const std::uint64_t base = rng.next_u64();
    const std::size_t blocks = (n + block_size - 1) / block_size;
    auto run = [&](std::size_t b) {
        Rng block_rng(base ^ Rng::mix(b + 1));
        std::size_t begin = b * block_size;
        std::size_t end = std::min(n, begin + block_size);
        fn(b, begin, end, block_rng);
    };
    unsigned threads = std::min<unsigned>(worker_threads(), static_cast<unsigned>(blocks));
    if (threads <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) run(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t b = next++; b < blocks; b = next++) run(b);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace voxlab
