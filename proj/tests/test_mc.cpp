#include <doctest.h>

#include <cmath>
#include <set>

#include "steinlab/errors.hpp"
#include "steinlab/mc.hpp"

using namespace steinlab;

TEST_CASE("accumulate") {
    McEstimate e;
    for (int k = 0; k < 3; ++k) e.accumulate(2.0);
    CHECK(e.mean() == 2.0);
    CHECK(e.variance() == 0.0);
    McEstimate f;
    for (double x : {1.0, 2.0, 3.0}) f.accumulate(x);
    CHECK(f.mean() == 2.0);
    CHECK(f.variance() == 1.0);
    CHECK_THROWS_AS(f.accumulate(NAN), DataError);
    CHECK_THROWS_AS(f.accumulate(INFINITY), DataError);
}

TEST_CASE("a million standard normals have mean within 4/1000 of 0") {
    RngStream rng(SeedSpec{2024, {}});
    McEstimate e;
    for (int k = 0; k < 1000000; ++k) e.accumulate(rng.normal());
    CHECK(std::abs(e.mean()) < 4e-3);
    CHECK(e.variance() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("merge") {
    McEstimate a, empty;
    for (double x : {0.5, 1.5, -2.0}) a.accumulate(x);
    McEstimate b = a;
    b.merge(empty);
    CHECK(b.count() == a.count());
    CHECK(b.mean() == a.mean());
    CHECK(b.m2() == a.m2());
    McEstimate c = empty;
    c.merge(a);
    CHECK(c.mean() == a.mean());

    // split in half vs single pass
    RngStream rng(SeedSpec{1, {3}});
    std::vector<double> xs(1000);
    for (auto& x : xs) x = rng.normal() * 3.0 + 1.0;
    McEstimate whole, h1, h2;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        whole.accumulate(xs[k]);
        (k < 500 ? h1 : h2).accumulate(xs[k]);
    }
    McEstimate merged = merge(h1, h2);
    CHECK(merged.count() == whole.count());
    CHECK(merged.mean() == doctest::Approx(whole.mean()).epsilon(1e-14));
    CHECK(merged.m2() == doctest::Approx(whole.m2()).epsilon(1e-13));

    // three-way merge under a fixed order is reproducible
    McEstimate p, q, r;
    for (std::size_t k = 0; k < xs.size(); ++k) (k % 3 == 0 ? p : k % 3 == 1 ? q : r).accumulate(xs[k]);
    const McEstimate left = merge(merge(p, q), r);
    const McEstimate again = merge(merge(p, q), r);
    CHECK(left.mean() == again.mean());
    CHECK(left.m2() == again.m2());
    const McEstimate right = merge(p, merge(q, r));
    CHECK(left.mean() == doctest::Approx(right.mean()).epsilon(1e-14));
}

TEST_CASE("ci95") {
    McEstimate one;
    one.accumulate(1.0);
    CHECK_THROWS_AS(one.ci95(), InsufficientDataError);
    const McEstimate c = McEstimate::constant(3.0, 10);
    CHECK(c.ci95().first == 3.0);
    CHECK(c.ci95().second == 3.0);

    // width halves when the count quadruples with the same variance
    McEstimate small, big;
    for (int k = 0; k < 100; ++k) small.accumulate(k % 2 ? 1.0 : -1.0);
    for (int k = 0; k < 400; ++k) big.accumulate(k % 2 ? 1.0 : -1.0);
    const double ws = small.ci95().second - small.ci95().first;
    const double wb = big.ci95().second - big.ci95().first;
    CHECK(wb / ws == doctest::Approx(0.5 * std::sqrt(99.0 / 100.0 * 400.0 / 399.0)).epsilon(1e-12));
}

TEST_CASE("ci95 coverage over 1000 synthetic Gaussian experiments") {
    int covered = 0;
    for (std::uint64_t e = 0; e < 1000; ++e) {
        RngStream rng(SeedSpec{99, {e}});
        McEstimate est;
        for (int k = 0; k < 200; ++k) est.accumulate(0.7 + 2.0 * rng.normal());
        const auto [lo, hi] = est.ci95();
        if (lo <= 0.7 && 0.7 <= hi) ++covered;
    }
    // Binomial(1000, 0.95) has sd ~ 6.9; allow a generous band.
    CHECK(covered >= 920);
    CHECK(covered <= 975);
}

TEST_CASE("Philox4x32-10 known answers") {
    const auto z = philox4x32_10({0, 0, 0, 0}, {0, 0});
    CHECK(z[0] == 0x6627e8d5u);
    CHECK(z[1] == 0xe169c58du);
    CHECK(z[2] == 0xbc57ac4cu);
    CHECK(z[3] == 0x9b00dbd8u);
    const auto f = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(f[0] == 0x408f276du);
    CHECK(f[1] == 0x41c83b0eu);
    CHECK(f[2] == 0xa20bc7c6u);
    CHECK(f[3] == 0x6d5451fdu);
}

TEST_CASE("substreams are reproducible and distinct") {
    const SeedSpec s{42, {1, 2}};
    RngStream a(s), b(s), c(s.child(0)), d(SeedSpec{42, {1, 3}});
    std::set<std::uint64_t> seen;
    for (int k = 0; k < 100; ++k) {
        const auto x = a();
        CHECK(x == b());
        seen.insert(x);
        seen.insert(c());
        seen.insert(d());
    }
    CHECK(seen.size() == 300);
    CHECK(SeedSpec{1, {}}.key() != SeedSpec{1, {0}}.key());
    CHECK(SeedSpec{1, {0, 1}}.key() != SeedSpec{1, {1, 0}}.key());
}

TEST_CASE("lag-1 cross-correlation between distinct streams is small") {
    const std::size_t N = 200000;
    RngStream a(SeedSpec{7, {0}}), b(SeedSpec{7, {1}});
    std::vector<double> xa(N + 1), xb(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
        xa[k] = a.uniform() - 0.5;
        xb[k] = b.uniform() - 0.5;
    }
    double c0 = 0, c1 = 0;
    for (std::size_t k = 0; k < N; ++k) {
        c0 += xa[k] * xb[k];
        c1 += xa[k] * xb[k + 1];
    }
    const double var = 1.0 / 12.0;
    CHECK(std::abs(c0 / N / var) < 4.0 / std::sqrt(static_cast<double>(N)));
    CHECK(std::abs(c1 / N / var) < 4.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("uniform, bernoulli and below") {
    RngStream rng(SeedSpec{3, {}});
    McEstimate u, bern;
    std::vector<int> counts(7, 0);
    for (int k = 0; k < 70000; ++k) {
        const double x = rng.uniform();
        CHECK((x >= 0.0 && x < 1.0));
        u.accumulate(x);
        bern.accumulate(rng.bernoulli(0.3) ? 1.0 : 0.0);
        ++counts[rng.below(7)];
    }
    CHECK(std::abs(u.mean() - 0.5) < 4 * u.std_error());
    CHECK(std::abs(bern.mean() - 0.3) < 4 * bern.std_error());
    for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(10000 * 6.0 / 7.0));
}

TEST_CASE("monte_carlo is independent of the worker count") {
    auto body = [](RngStream& rng, McEstimate& acc) { acc.accumulate(rng.normal() * rng.uniform()); };
    const SeedSpec s{123, {}};
    const McEstimate w1 = monte_carlo(10000, s, 1, body, McEstimate{});
    const McEstimate w3 = monte_carlo(10000, s, 3, body, McEstimate{});
    const McEstimate w8 = monte_carlo(10000, s, 8, body, McEstimate{});
    CHECK(w1.count() == 10000);
    CHECK(w1.mean() == w3.mean());
    CHECK(w1.m2() == w3.m2());
    CHECK(w1.mean() == w8.mean());
    CHECK(w1.m2() == w8.m2());
}

TEST_CASE("monte_carlo propagates exceptions") {
    auto body = [](RngStream&, McEstimate& acc) { acc.accumulate(NAN); };
    CHECK_THROWS_AS(monte_carlo(10, SeedSpec{}, 2, body, McEstimate{}), DataError);
}
