#include "steinlab/mc.hpp"

#include <cmath>

#include "steinlab/errors.hpp"

namespace steinlab {

void McEstimate::accumulate(double x) {
    if (!std::isfinite(x)) throw DataError("non-finite Monte Carlo observation");
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
}

void McEstimate::merge(const McEstimate& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    count_ += other.count_;
}

double McEstimate::variance() const {
    if (count_ < 2) return 0.0;
    return std::max(0.0, m2_ / static_cast<double>(count_ - 1));
}

double McEstimate::std_error() const {
    if (count_ == 0) return 0.0;
    return std::sqrt(variance() / static_cast<double>(count_));
}

std::pair<double, double> McEstimate::ci95() const {
    if (count_ < 2) throw InsufficientDataError("a confidence interval needs at least two samples");
    const double h = 1.96 * std_error();
    return {mean_ - h, mean_ + h};
}

McEstimate McEstimate::constant(double value, std::uint64_t count) {
    if (!std::isfinite(value)) throw DataError("non-finite Monte Carlo observation");
    McEstimate e;
    e.count_ = count;
    e.mean_ = count ? value : 0.0;
    return e;
}

McEstimate accumulate(McEstimate est, double x) {
    est.accumulate(x);
    return est;
}

McEstimate merge(McEstimate a, const McEstimate& b) {
    a.merge(b);
    return a;
}

void McVector::merge(const McVector& other) {
    if (items.empty()) items.resize(other.items.size());
    if (items.size() != other.items.size()) throw DimensionError("McVector size mismatch in merge");
    for (std::size_t i = 0; i < items.size(); ++i) items[i].merge(other.items[i]);
}

// --- Philox4x32-10 -------------------------------------------------------------

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

SeedSpec SeedSpec::child(std::uint64_t index) const {
    SeedSpec s = *this;
    s.path.push_back(index);
    return s;
}

std::array<std::uint32_t, 2> SeedSpec::key() const {
    std::uint64_t h = splitmix64(root);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ull));
    // Distinguish a path from its zero-extended prefix.
    h = splitmix64(h ^ path.size());
    return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
}

RngStream::RngStream(const SeedSpec& seed) : key_(seed.key()) {}

std::uint32_t RngStream::next32() {
    if (used_ == 4) {
        block_ = philox4x32_10({static_cast<std::uint32_t>(counter_),
                                static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
                               key_);
        ++counter_;
        used_ = 0;
    }
    return block_[static_cast<std::size_t>(used_++)];
}

RngStream::result_type RngStream::operator()() {
    const std::uint64_t hi = next32();
    const std::uint64_t lo = next32();
    return (hi << 32) | lo;
}

double RngStream::uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(*this); }

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw DomainError("below(0) is empty");
    // Rejecting the incomplete top block keeps the draw exactly uniform.
    const std::uint64_t limit = max() - max() % n;
    for (;;) {
        const std::uint64_t x = (*this)();
        if (x < limit) return x % n;
    }
}

unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

} // namespace steinlab
