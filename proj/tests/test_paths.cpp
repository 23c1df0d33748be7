#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "steinlab/errors.hpp"
#include "steinlab/paths.hpp"

using namespace steinlab;

namespace {

PiecewiseConstantPath half_jump_34() {
    return PiecewiseConstantPath(2, {TimePoint(0, 1), TimePoint(1, 2)}, {0.0, 0.0, 3.0, 4.0});
}

PiecewiseConstantPath random_path(std::mt19937_64& gen, std::size_t dim, int den) {
    std::uniform_int_distribution<int> count(0, 5), pos(1, den);
    std::normal_distribution<double> nd;
    std::vector<TimePoint> bps{TimePoint(0, 1)};
    std::set<int> cuts;
    const int k = count(gen);
    for (int i = 0; i < k; ++i) cuts.insert(pos(gen));
    for (int c : cuts) bps.emplace_back(c, den);
    std::vector<double> v(bps.size() * dim);
    for (auto& x : v) x = nd(gen);
    return PiecewiseConstantPath(dim, bps, v);
}

} // namespace

TEST_CASE("TimePoint reduces, parses and floors exactly") {
    CHECK(TimePoint(2, 4) == TimePoint(1, 2));
    CHECK(TimePoint::parse("3/6") == TimePoint(1, 2));
    CHECK(TimePoint::parse("0.37") == TimePoint(37, 100));
    CHECK(TimePoint::parse("1") == TimePoint(1, 1));
    CHECK_THROWS_AS(TimePoint(3, 2), DomainError);
    CHECK_THROWS_AS(TimePoint(-1, 2), DomainError);
    CHECK_THROWS_AS(TimePoint::parse("abc"), Error);
    // floor(n t) at exact breakpoints has no float drift.
    CHECK(TimePoint(1, 3).floor_mul(3) == 1);
    CHECK(TimePoint(29, 100).floor_mul(100) == 29);
    CHECK(TimePoint(999999999999LL, 1000000000000LL).floor_mul(1000000000000LL) == 999999999999LL);
    CHECK(TimePoint(1, 3) < TimePoint(1, 2));
}

TEST_CASE("evaluate is right-continuous") {
    const auto p = half_jump_34();
    CHECK(p.evaluate(TimePoint(1, 2)) == Eigen::Vector2d(3, 4));
    CHECK(p.evaluate(TimePoint(0, 1)) == Eigen::Vector2d(0, 0));
    CHECK(p.evaluate(TimePoint(1, 1)) == Eigen::Vector2d(3, 4));

    // sum_{i=1}^3 1_{[i/3,1]} at t = 2/3 is 2.
    auto s = step_indicator(1, 3, 1, 1);
    s = lin_comb(1.0, s, 1.0, step_indicator(2, 3, 1, 1));
    s = lin_comb(1.0, s, 1.0, step_indicator(3, 3, 1, 1));
    CHECK(s.evaluate(TimePoint(2, 3))[0] == 2.0);
}

TEST_CASE("sup_norm") {
    CHECK(half_jump_34().sup_norm() == 5.0);
    CHECK(PiecewiseConstantPath::zero(3).sup_norm() == 0.0);
    const PiecewiseConstantPath p(1, {TimePoint(0, 1), TimePoint(1, 3), TimePoint(2, 3)}, {1.0, -2.0, 1.5});
    CHECK(p.sup_norm() == 2.0);
}

TEST_CASE("lin_comb") {
    const auto x = half_jump_34();
    CHECK(lin_comb(1.0, x, -1.0, x).sup_norm() == 0.0);
    const PiecewiseConstantPath e1(2, {TimePoint(0, 1), TimePoint(1, 2)}, {0, 0, 1, 0});
    const auto scaled = lin_comb(2.0, e1, 0.0, x);
    CHECK(paths_equal(scaled, PiecewiseConstantPath(2, {TimePoint(0, 1), TimePoint(1, 2)}, {0, 0, 2, 0})));
    const PiecewiseConstantPath a(1, {TimePoint(0, 1), TimePoint(1, 3)}, {0, 1});
    const PiecewiseConstantPath b(1, {TimePoint(0, 1), TimePoint(2, 3)}, {0, 1});
    const auto c = lin_comb(1.0, a, 1.0, b);
    REQUIRE(c.intervals() == 3);
    CHECK(c.breakpoints()[1] == TimePoint(1, 3));
    CHECK(c.breakpoints()[2] == TimePoint(2, 3));
    CHECK_THROWS_AS(lin_comb(1.0, a, 1.0, x), DimensionError);
}

TEST_CASE("step_indicator") {
    const auto s = step_indicator(4, 4, 1, 1);
    CHECK(s.evaluate(TimePoint(1, 1))[0] == 1.0);
    CHECK(s.evaluate(TimePoint(99, 100))[0] == 0.0);
    CHECK(s.sup_norm() == 1.0);
    const auto h = step_indicator(1, 2, 2, 2);
    CHECK(h.evaluate(TimePoint(1, 2)) == Eigen::Vector2d(0, 1));
    CHECK(step_indicator(2, 4, 1, 2).evaluate(TimePoint::parse("0.49")) == Eigen::Vector2d(0, 0));
    CHECK_THROWS_AS(step_indicator(0, 4, 1, 1), DomainError);
    CHECK_THROWS_AS(step_indicator(5, 4, 1, 1), DomainError);
    CHECK_THROWS_AS(step_indicator(1, 4, 3, 2), DomainError);
}

TEST_CASE("path invariants are enforced") {
    CHECK_THROWS(PiecewiseConstantPath(1, {TimePoint(1, 2)}, {1.0}));
    CHECK_THROWS(PiecewiseConstantPath(1, {TimePoint(0, 1), TimePoint(1, 2), TimePoint(1, 2)}, {1, 2, 3}));
    CHECK_THROWS(PiecewiseConstantPath(1, {TimePoint(0, 1)}, {NAN}));
    CHECK_THROWS(PiecewiseConstantPath(2, {TimePoint(0, 1)}, {1.0}));
}

TEST_CASE("uniform grid paths carry n+1 breakpoints and share them") {
    std::vector<double> v(5, 1.0);
    const auto p = PiecewiseConstantPath::on_uniform_grid(1, 4, v);
    CHECK(p.intervals() == 5);
    const auto q = PiecewiseConstantPath::on_uniform_grid(1, 4, v);
    CHECK(p.shared_breakpoints().get() == q.shared_breakpoints().get());
}

TEST_CASE("JSON round trip") {
    const auto p = half_jump_34();
    const auto j = p.to_json();
    CHECK(j["breakpoints"][1] == nlohmann::json::array({1, 2}));
    CHECK(paths_equal(PiecewiseConstantPath::from_json(j), p));
}

TEST_CASE("linearity properties on random paths") {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> num(0, 60);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_path(gen, 2, 12), y = random_path(gen, 2, 15);
        const double a = nd(gen), b = nd(gen);
        const auto z = lin_comb(a, x, b, y);
        CHECK(z.sup_norm() <= std::abs(a) * x.sup_norm() + std::abs(b) * y.sup_norm() + 1e-12);
        for (int k = 0; k < 20; ++k) {
            const TimePoint t(num(gen), 60);
            const Eigen::VectorXd diff = z.evaluate(t) - (a * x.evaluate(t) + b * y.evaluate(t));
            CHECK(diff.norm() <= 1e-12);
        }
        // sup over a grid containing all breakpoints (den 60 covers 12 and 15) is exact.
        double grid_sup = 0.0;
        for (int k = 0; k <= 60; ++k) grid_sup = std::max(grid_sup, z.evaluate(TimePoint(k, 60)).norm());
        CHECK(grid_sup == doctest::Approx(z.sup_norm()).epsilon(1e-15));
    }
}

TEST_CASE("times_matrix multiplies as a row vector") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 0, 3;
    const auto r = half_jump_34().times_matrix(m);
    CHECK(r.evaluate(TimePoint(1, 1)) == Eigen::Vector2d(3, 18));
}
