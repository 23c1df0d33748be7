#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <thread>
#include <utility>
#include <vector>

namespace steinlab {

/// Streaming mean / variance (Welford) of a scalar statistic.
class McEstimate {
public:
    McEstimate() = default;

    /// Adds one observation; throws DataError for a non-finite value.
    void accumulate(double x);

    /// Folds `other` into this estimate (Chan et al. pairwise update).
    void merge(const McEstimate& other);

    std::uint64_t count() const { return count_; }
    double mean() const { return mean_; }
    double m2() const { return m2_; }

    /// Unbiased sample variance; 0 for fewer than two observations.
    double variance() const;
    double std_error() const;
    /// mean +- 1.96 stderr; needs at least two observations.
    std::pair<double, double> ci95() const;

    /// An estimate holding `count` copies of `value` (zero-variance).
    static McEstimate constant(double value, std::uint64_t count);

private:
    std::uint64_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

McEstimate accumulate(McEstimate est, double x);
McEstimate merge(McEstimate a, const McEstimate& b);

/// Element-wise vector of estimates that merges as a unit.
struct McVector {
    std::vector<McEstimate> items;

    McVector() = default;
    explicit McVector(std::size_t n) : items(n) {}

    McEstimate& operator[](std::size_t i) { return items[i]; }
    const McEstimate& operator[](std::size_t i) const { return items[i]; }
    std::size_t size() const { return items.size(); }
    void merge(const McVector& other);
};

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Root seed plus a path of task indices naming an independent substream.
struct SeedSpec {
    std::uint64_t root = 0;
    std::vector<std::uint64_t> path;

    SeedSpec child(std::uint64_t index) const;
    /// Philox key derived from (root, path).
    std::array<std::uint32_t, 2> key() const;
};

/// Counter-based random stream; a UniformRandomBitGenerator producing 64-bit words.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(const SeedSpec& seed);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    /// Uniform on [0,1) with 53 random bits.
    double uniform();
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    std::normal_distribution<double> normal_;

    std::uint32_t next32();
};

/// Samples per chunk; fixed so results do not depend on the worker count.
inline constexpr std::size_t kChunkSize = 1024;

unsigned resolve_workers(unsigned requested);

/// Deterministic parallel Monte Carlo driver.
///
/// `samples` draws are split into fixed-size chunks; chunk c draws from substream seed.child(c)
/// into a private accumulator initialised from `init`, and the per-chunk accumulators are merged
/// in chunk order. `body(rng, acc)` performs one draw. Acc must provide merge(const Acc&).
template <class Acc, class Body>
Acc monte_carlo(std::size_t samples, const SeedSpec& seed, unsigned workers, Body&& body,
                const Acc& init) {
    const std::size_t chunks = (samples + kChunkSize - 1) / kChunkSize;
    std::vector<Acc> partial(chunks, init);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(chunks);
    auto work = [&]() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                RngStream rng(seed.child(c));
                const std::size_t lo = c * kChunkSize;
                const std::size_t hi = std::min(samples, lo + kChunkSize);
                for (std::size_t s = lo; s < hi; ++s) body(rng, partial[c]);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    const unsigned w = std::min<unsigned>(resolve_workers(workers),
                                          static_cast<unsigned>(std::max<std::size_t>(chunks, 1)));
    if (w <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    Acc result = init;
    for (const auto& p : partial) result.merge(p);
    return result;
}

} // namespace steinlab
