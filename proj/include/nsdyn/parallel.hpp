#ifndef NSDYN_PARALLEL_HPP
#define NSDYN_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace nsdyn {

/// Worker count used when a caller passes 0: NSDYN_WORKERS if set, else 1.
inline unsigned default_workers()
{
    if (const char* env = std::getenv("NSDYN_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0)
            return static_cast<unsigned>(v);
    }
    return 1;
}

/// Runs body(i) for i in [0, count). Results must be written by index; the
/// schedule never influences what is computed, only when.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body)
{
    if (workers == 0)
        workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::size_t first_error_index = count;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count)
                    return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    // lowest index wins so the reported error does not depend on scheduling
                    if (i < first_error_index) {
                        first_error_index = i;
                        first_error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

/// SplitMix64 finalizer; used to derive independent per-member seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic RNG stream for ensemble member `index` of a run seeded with `seed`.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t index) : engine_(mix_seed(seed, index)) {}

    /// Uniform in [0, 1) with 53 random bits; independent of the standard library's distributions.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace nsdyn

#endif
