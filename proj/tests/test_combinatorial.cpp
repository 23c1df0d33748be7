#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "steinlab/combinatorial.hpp"
#include "steinlab/errors.hpp"
#include "steinlab/functionals.hpp"

using namespace steinlab;

namespace {

Eigen::MatrixXd small_deterministic() {
    Eigen::MatrixXd x(3, 3);
    x << 1, -1, 0, -1, 1, 0, 0, 0, 0;
    return x;
}

CombinatorialRealization realization(const Eigen::MatrixXd& x, std::vector<std::size_t> pi, double s) {
    CombinatorialRealization r;
    r.x = x;
    r.pi = std::move(pi);
    r.s = s;
    r.path = combinatorial_path(r.x, r.pi, s);
    return r;
}

ArrayModel mixed_model(std::size_t n, std::mt19937_64& gen) {
    // Centred means from a random matrix, with a mix of entry laws around them.
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.2, 1.5);
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = nd(gen);
    c = double_center(c);
    std::vector<EntrySpec> e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double m = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            switch ((i + 2 * j) % 3) {
                case 0: e.push_back(EntrySpec::gaussian(m, ud(gen))); break;
                case 1: e.push_back(EntrySpec::rademacher_shifted(m, ud(gen))); break;
                default: e.push_back(EntrySpec::constant(m)); break;
            }
        }
    return ArrayModel(n, e);
}

} // namespace

TEST_CASE("s_n squared examples") {
    CHECK(s_n_squared(ArrayModel::deterministic(small_deterministic())) == doctest::Approx(2.0).epsilon(1e-15));
    for (std::size_t n : {2u, 5u, 11u}) CHECK(s_n_squared(ArrayModel::iid_gaussian(n)) == doctest::Approx(double(n)));
    CHECK_THROWS_AS(ArrayModel::deterministic(Eigen::MatrixXd::Zero(3, 3)), DegenerateModelError);
}

TEST_CASE("s_n squared is the variance of the permutation sum (enumeration)") {
    const Eigen::MatrixXd x = small_deterministic();
    std::vector<std::size_t> pi{0, 1, 2};
    double sum = 0, sum2 = 0;
    int count = 0;
    do {
        double v = 0;
        for (std::size_t i = 0; i < 3; ++i) v += x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pi[i]));
        sum += v;
        sum2 += v * v;
        ++count;
    } while (std::next_permutation(pi.begin(), pi.end()));
    CHECK(sum2 / count - (sum / count) * (sum / count) == doctest::Approx(2.0));
}

TEST_CASE("model validation") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1, 0, 0, -1;  // rows do not average to zero
    CHECK_THROWS(ArrayModel::deterministic(bad));
    Eigen::MatrixXd c(3, 3);
    c << 1, 2, 3, 4, 5, 6, 7, 9, 8;
    const Eigen::MatrixXd dc = double_center(c);
    CHECK(dc.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(dc.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    // JSON round trip keeps the model.
    std::mt19937_64 gen(3);
    const ArrayModel m = mixed_model(4, gen);
    const ArrayModel back = ArrayModel::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    CHECK(back.s() == m.s());
}

TEST_CASE("entry moments") {
    const auto g = EntrySpec::gaussian(0.0, 1.0);
    CHECK(g.abs_moment(1) == doctest::Approx(std::sqrt(2.0 / M_PI)));
    CHECK(g.abs_moment(2) == doctest::Approx(1.0));
    CHECK(g.abs_moment(3) == doctest::Approx(2.0 * std::sqrt(2.0 / M_PI)));
    // E|X|^3 of a shifted normal against adaptive quadrature of the density.
    const auto s = EntrySpec::gaussian(0.7, 1.3);
    auto integrand = [](double x) {
        const double z = (x - 0.7) / 1.3;
        return std::abs(x * x * x) * std::exp(-0.5 * z * z) / (1.3 * std::sqrt(2 * M_PI));
    };
    const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -20.0, 20.0, 15, 1e-13);
    CHECK(s.abs_moment(3) == doctest::Approx(q).epsilon(1e-9));
    const auto r = EntrySpec::rademacher_shifted(0.5, 2.0);
    CHECK(r.abs_moment(3) == doctest::Approx(0.5 * (2.5 * 2.5 * 2.5 + 1.5 * 1.5 * 1.5)));
    CHECK(r.variance() == doctest::Approx(4.0));
}

TEST_CASE("zhat_cov examples") {
    const auto det = ArrayModel::deterministic(small_deterministic());
    CHECK(zhat_cov(det, 1, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto iid = ArrayModel::iid_gaussian(5);
    for (std::size_t i = 1; i <= 5; ++i)
        for (std::size_t j = 1; j <= 5; ++j) CHECK(zhat_cov(iid, i, j) == (i == j ? doctest::Approx(1.0) : doctest::Approx(0.0)));
    std::mt19937_64 gen(9);
    const ArrayModel m = mixed_model(5, gen);
    for (std::size_t i = 1; i <= 5; ++i)
        for (std::size_t j = 1; j <= 5; ++j)
            CHECK(zhat_cov_difference_form(m, i, j) == doctest::Approx(zhat_cov(m, i, j)).epsilon(1e-12).scale(1.0));
}

TEST_CASE("regression residual by pair enumeration") {
    const auto det = ArrayModel::deterministic(small_deterministic());
    const auto lin = parse_functional("lin:coords=1,t=1", 1);
    const auto cst = parse_functional("const:value=2", 1);
    std::vector<std::size_t> pi{0, 1, 2};
    do {
        const auto r = realization(small_deterministic(), pi, det.s());
        CHECK(regression_residual(r, lin) < 1e-12);
        CHECK(regression_residual(r, cst) == 0.0);
    } while (std::next_permutation(pi.begin(), pi.end()));

    RngStream rng(SeedSpec{17, {}});
    const auto gauss = ArrayModel::iid_gaussian(6);
    const auto sinf = parse_functional("sin:coord=1,t=1/3,2/3,1", 1);
    const auto tanhf = parse_functional("tanh:coord=1,t=1/2,5/6", 1);
    for (int k = 0; k < 10; ++k) {
        const auto r = sample_y(gauss, rng);
        CHECK(regression_residual(r, sinf) < 1e-10);
        CHECK(regression_residual(r, tanhf) < 1e-10);
    }
}

TEST_CASE("sample_y structure and normalization") {
    std::mt19937_64 gen(21);
    const ArrayModel m = mixed_model(5, gen);
    RngStream rng(SeedSpec{1, {}});
    McEstimate var;
    for (int k = 0; k < 100000; ++k) {
        const auto r = sample_y(m, rng);
        double total = 0;
        for (std::size_t i = 0; i < 5; ++i) total += r.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r.pi[i]));
        const double y1 = r.path.evaluate(TimePoint(1, 1))[0];
        if (k < 50) {
            CHECK(y1 == doctest::Approx(total / m.s()));
            CHECK(r.path.intervals() == 6);
            std::vector<std::size_t> sorted = r.pi;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < 5; ++i) CHECK(sorted[i] == i);
        }
        var.accumulate(y1 * y1);
    }
    CHECK(std::abs(var.mean() - 1.0) <= 4 * var.std_error());
}

TEST_CASE("exchangeable pair: involution, sup bound, symmetric statistics") {
    std::mt19937_64 gen(4);
    const ArrayModel m = mixed_model(6, gen);
    RngStream rng(SeedSpec{8, {}});
    McEstimate diff;
    for (int k = 0; k < 20000; ++k) {
        const auto p = sample_pair(m, rng);
        const auto back = swap_pair(p.y_prime, p.i, p.j);
        CHECK(back.pi == p.y.pi);
        CHECK(paths_equal(back.path, p.y.path));
        auto xa = [&](std::size_t r, std::size_t c) {
            return std::abs(p.y.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        };
        const double bound = 2.0 / m.s() *
                             (xa(p.i, p.y.pi[p.i]) + xa(p.j, p.y.pi[p.j]) + xa(p.i, p.y.pi[p.j]) + xa(p.j, p.y.pi[p.i]));
        CHECK(lin_comb(1.0, p.y.path, -1.0, p.y_prime.path).sup_norm() <= bound + 1e-12);
        // Y(1)^3 - Y'(1)^3 is antisymmetric, so its mean vanishes under exchangeability.
        const double a = p.y.path.evaluate(TimePoint(1, 2))[0], b = p.y_prime.path.evaluate(TimePoint(1, 2))[0];
        diff.accumulate(a * a * a - b * b * b);
    }
    CHECK(std::abs(diff.mean()) <= 4 * diff.std_error());
}

TEST_CASE("Zhat and D_n Monte Carlo against closed forms") {
    std::mt19937_64 gen(12);
    const ArrayModel m = mixed_model(4, gen);
    RngStream rng(SeedSpec{5, {}});
    std::vector<McEstimate> prod(16);
    McEstimate mean_dn, cov_dn;
    const TimePoint s(1, 2), t(3, 4);
    for (int k = 0; k < 100000; ++k) {
        const Eigen::VectorXd z = sample_zhat(m, rng);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) prod[static_cast<std::size_t>(4 * i + j)].accumulate(z[i] * z[j]);
        const auto d = sample_dn(m, rng);
        mean_dn.accumulate(d.evaluate(t)[0]);
        cov_dn.accumulate(d.evaluate(s)[0] * d.evaluate(t)[0]);
    }
    for (std::size_t i = 1; i <= 4; ++i)
        for (std::size_t j = 1; j <= 4; ++j) {
            const auto& e = prod[4 * (i - 1) + (j - 1)];
            CHECK(std::abs(e.mean() - zhat_cov(m, i, j)) <= 4 * e.std_error());
        }
    CHECK(std::abs(mean_dn.mean()) <= 4 * mean_dn.std_error());
    CHECK(std::abs(cov_dn.mean() - dn_covariance(m, s, t)) <= 4 * cov_dn.std_error());
    double direct = 0;
    for (std::size_t i = 1; i <= 2; ++i)
        for (std::size_t j = 1; j <= 3; ++j) direct += zhat_cov(m, i, j);
    CHECK(dn_covariance(m, s, t) == doctest::Approx(direct / (m.s() * m.s())));
    // D_n shares the uniform breakpoint set of Y_n.
    const auto d = sample_dn(m, rng);
    const auto y = sample_y(m, rng);
    CHECK(d.breakpoints() == y.path.breakpoints());
}

TEST_CASE("Theorem 5.1 evaluator") {
    // Frozen from an independent five-index evaluation of the printed formula.
    const auto iid10 = ArrayModel::iid_gaussian(10);
    CHECK(bound_theorem51(iid10, 1.0) == doctest::Approx(16.010832169508834).epsilon(1e-12));
    CHECK(bound_theorem51(iid10, 1.0, true) == doctest::Approx(16.010832169508834).epsilon(1e-12));
    CHECK(bound_theorem51(iid10, 0.0) == 0.0);
    CHECK(bound_theorem51(iid10, 2.5) == doctest::Approx(2.5 * 16.010832169508834).epsilon(1e-12));

    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> ud(0.1, 2.0);
    std::normal_distribution<double> nd;
    for (std::size_t n : {2u, 3u, 4u, 5u, 6u}) {
        MomentTables t;
        const auto N = static_cast<Eigen::Index>(n);
        t.abs1.resize(N, N);
        t.abs2.resize(N, N);
        t.abs3.resize(N, N);
        t.mean.resize(N, N);
        t.variance.resize(N, N);
        for (Eigen::Index k = 0; k < N * N; ++k) {
            t.abs1.data()[k] = ud(gen);
            t.abs2.data()[k] = ud(gen);
            t.abs3.data()[k] = ud(gen);
            t.mean.data()[k] = nd(gen);
            t.variance.data()[k] = ud(gen);
        }
        t.s = ud(gen) + 0.5;
        const auto fast = theorem51_terms(t, 1.3, false);
        const auto slow = theorem51_terms(t, 1.3, true);
        CHECK(fast.total == doctest::Approx(slow.total).epsilon(1e-12));
        CHECK(fast.sum_term == doctest::Approx(slow.sum_term).epsilon(1e-12));
    }

    // Row permutation of the model leaves the bound unchanged.
    const ArrayModel m = mixed_model(5, gen);
    const std::vector<std::size_t> perm{3, 0, 4, 2, 1};
    std::vector<EntrySpec> permuted;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) permuted.push_back(m.entry(perm[i], j));
    CHECK(bound_theorem51(ArrayModel(5, permuted), 1.0) == doctest::Approx(bound_theorem51(m, 1.0)).epsilon(1e-12));

    const auto terms = theorem51_terms(iid10.moments(), 1.0);
    CHECK(terms.root_term == doctest::Approx(2.0 / std::sqrt(10.0)));
    CHECK(terms.variance_term == doctest::Approx(4.0 * 100.0 / (3.0 * 10.0 * 10.0)));
}

TEST_CASE("bound_beta3 example") {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Zero(100, 100);
    const double b = bound_beta3(100, 10.0, 1.6, c, 1e4, 1.0);
    const double expected = 58.0 * 1.6 * 1e4 / (99.0 * 1000.0) + 0.2 + 4.0 / 3.0;
    CHECK(b == doctest::Approx(expected).epsilon(1e-14));
    CHECK(b == doctest::Approx(10.91).epsilon(1e-3));
    CHECK(bound_beta3(100, 10.0, 1.6, c, 1e4, 2.0) == doctest::Approx(2.0 * b).epsilon(1e-14));
    Eigen::MatrixXd c2 = Eigen::MatrixXd::Zero(100, 100);
    c2(0, 0) = 1.0;
    CHECK(bound_beta3(100, 10.0, 1.6, c2, 1e4, 1.0) > b);
}

TEST_CASE("assumption diagnostic") {
    const auto iid = ArrayModel::iid_gaussian(4);
    std::vector<TimePoint> grid{TimePoint(0, 1), TimePoint(1, 2), TimePoint(1, 1)};
    const auto rows = assumption_diagnostic(iid, grid);
    REQUIRE(rows.size() == 9);
    for (const auto& r : rows) {
        if (r.t == TimePoint(0, 1) || r.u == TimePoint(0, 1)) {
            CHECK(r.lhs1 == 0.0);
            CHECK(r.lhs2 == 0.0);
        }
        if (r.t == TimePoint(1, 1) && r.u == TimePoint(1, 1)) {
            // (1/(s^2 (n-1))) * sum_i n (1 - 1/n) with s^2 = n = 4: 4*4*(3/4)/(4*3) = 1.
            CHECK(r.lhs1 == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(r.lhs2 == doctest::Approx(4.0).epsilon(1e-15));
        }
        for (const auto& q : rows)
            if (q.t == r.u && q.u == r.t) {
                CHECK(q.lhs1 == doctest::Approx(r.lhs1));
                CHECK(q.lhs2 == doctest::Approx(r.lhs2));
            }
    }
    std::mt19937_64 gen(2);
    const auto m = mixed_model(5, gen);
    const auto mrows = assumption_diagnostic(m, {TimePoint(2, 5), TimePoint(4, 5)});
    CHECK(mrows[1].lhs1 == doctest::Approx(mrows[2].lhs1));
}
