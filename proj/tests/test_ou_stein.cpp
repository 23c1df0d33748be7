#include <doctest.h>

#include <cmath>
#include <random>

#include "steinlab/errors.hpp"
#include "steinlab/ou_stein.hpp"

using namespace steinlab;

namespace {

// a * f + b * g + c on a shared set of times.
class AffineSum final : public SmoothMap {
public:
    AffineSum(std::shared_ptr<const SmoothMap> f, double a, std::shared_ptr<const SmoothMap> g, double b, double c)
        : f_(std::move(f)), g_(std::move(g)), a_(a), b_(b), c_(c) {}
    std::size_t input_size() const override { return f_->input_size(); }
    double value(const Eigen::VectorXd& x) const override { return a_ * f_->value(x) + b_ * g_->value(x) + c_; }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        return a_ * f_->gradient(x) + b_ * g_->gradient(x);
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override { return a_ * f_->hessian(x) + b_ * g_->hessian(x); }

private:
    std::shared_ptr<const SmoothMap> f_, g_;
    double a_, b_, c_;
};

CylinderFunctional affine(const CylinderFunctional& f, double a, const CylinderFunctional& g, double b, double c) {
    return CylinderFunctional(f.dim(), f.times(), std::make_shared<AffineSum>(f.shared_base(), a, g.shared_base(), b, c),
                              "affine");
}

ArrayModel deterministic_model(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(n, n);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = nd(gen);
    return ArrayModel::deterministic(double_center(x));
}

PiecewiseConstantPath fixed_path2() {
    return PiecewiseConstantPath(2, {TimePoint(0, 1), TimePoint(1, 3), TimePoint(2, 3)}, {0.0, 0.0, 0.4, -0.3, 0.9, 0.2});
}

bool within(const McEstimate& a, const McEstimate& b, double k) {
    return std::abs(a.mean() - b.mean()) <= k * std::hypot(a.std_error(), b.std_error());
}

} // namespace

TEST_CASE("Mehler semigroup: identity, ergodic limit, linear contraction") {
    const TargetLaw law = graph_law(GraphModel(5, 0.3));
    const auto g = parse_functional("tanhprod:coords=1,2,t=2/3,1", 2);
    const auto w = fixed_path2();
    const McEstimate t0 = mehler_apply(g, w, 0.0, law, 100, SeedSpec{1, {}});
    CHECK(t0.mean() == g.eval(w));
    CHECK(t0.variance() == 0.0);

    const McEstimate t20 = mehler_apply(g, w, 20.0, law, 100000, SeedSpec{2, {}});
    const McEstimate eg = law.expectation(g, 100000, SeedSpec{3, {}});
    CHECK(within(t20, eg, 4.0));
    // the cache returns the first estimate for a key.
    const McEstimate eg2 = law.expectation(g, 100000, SeedSpec{3, {}});
    CHECK(eg2.mean() == eg.mean());

    const auto lin = parse_functional("lin:coords=2,1,t=2/3,1", 2);
    for (double u : {0.1, 0.7, 2.0}) {
        const McEstimate tu = mehler_apply(lin, w, u, law, 50000, SeedSpec{4, {}});
        CHECK(std::abs(tu.mean() - std::exp(-u) * lin.eval(w)) <= 4 * tu.std_error());
    }
    CHECK_THROWS_AS(mehler_apply(g, w, -1.0, law, 10, SeedSpec{}), DomainError);
    CHECK_THROWS_AS(mehler_apply(parse_functional("sin:coord=1,t=1", 1), w, 1.0, law, 10, SeedSpec{}), DimensionError);
}

TEST_CASE("Mehler semigroup property by nested Monte Carlo") {
    const TargetLaw law = graph_law(GraphModel(4, 0.4));
    const auto g = parse_functional("cos:coord=2,t=1/2,1,scale=3", 2);
    const auto w = fixed_path2();
    const double u = 0.3, v = 0.5;
    // T_u (T_v g)(w): outer draws of the Mehler point, inner Mehler average at that point.
    RngStream outer(SeedSpec{7, {0}});
    McEstimate nested;
    for (std::uint64_t k = 0; k < 3000; ++k) {
        const auto d = law.sample(outer);
        const auto point = lin_comb(std::exp(-u), w, std::sqrt(1 - std::exp(-2 * u)), d);
        nested.accumulate(mehler_apply(g, point, v, law, 400, SeedSpec{7, {1, k}}).mean());
    }
    const McEstimate direct = mehler_apply(g, w, u + v, law, 200000, SeedSpec{8, {}});
    CHECK(within(nested, direct, 4.0));
}

TEST_CASE("generator examples") {
    const TargetLaw law = graph_law(GraphModel(6, 0.3));
    const auto w = fixed_path2();
    const auto lin = parse_functional("lin:coords=1,2,t=1/2,1", 2);
    CHECK(generator_apply(lin, w, law) == doctest::Approx(-lin.eval(w)).epsilon(1e-14));

    // At w = 0 with Df(0) = 0 only the trace contraction remains.
    const auto cosf = parse_functional("cos:coord=1,t=1/2,1", 2);
    const auto zero = PiecewiseConstantPath::zero(2);
    const Eigen::MatrixXd K = law.grid_covariance(cosf.times());
    CHECK(generator_apply(cosf, zero, law) == doctest::Approx(cosf.hessian_at(zero).cwiseProduct(K).sum()));

    // Linear in f and blind to constants.
    const auto sinf = parse_functional("sin:coord=2,t=1/2,1", 2);
    const auto mix = affine(cosf, 2.0, sinf, -0.5, 0.0);
    CHECK(generator_apply(mix, w, law) ==
          doctest::Approx(2.0 * generator_apply(cosf, w, law) - 0.5 * generator_apply(sinf, w, law)));
    CHECK(generator_apply(affine(cosf, 1.0, sinf, 0.0, 7.0), w, law) == doctest::Approx(generator_apply(cosf, w, law)));
}

TEST_CASE("generator is the derivative of the semigroup at zero") {
    const TargetLaw law = graph_law(GraphModel(5, 0.3));
    const auto f = parse_functional("tanhprod:coords=1,2,t=2/3,1", 2);
    const auto w = fixed_path2();
    const double h = 1e-3;
    // Antithetic draws remove the O(sqrt h) odd part of the difference quotient.
    RngStream rng(SeedSpec{11, {}});
    McEstimate quotient;
    const double fw = f.eval(w);
    for (int k = 0; k < 200000; ++k) {
        const auto d = law.sample(rng);
        const double r = std::sqrt(1 - std::exp(-2 * h));
        const double plus = f.eval(lin_comb(std::exp(-h), w, r, d)), minus = f.eval(lin_comb(std::exp(-h), w, -r, d));
        quotient.accumulate((0.5 * (plus + minus) - fw) / h);
    }
    const double a = generator_apply(f, w, law);
    CHECK(std::abs(quotient.mean() - a) <= 4 * quotient.std_error() + 20 * h * (1 + std::abs(a)));
}

TEST_CASE("Stein identity holds for the pre-limit laws") {
    const TargetLaw gl = graph_law(GraphModel(6, 0.3));
    const auto sinf = parse_functional("sin:coord=1,t=1/2,1", 2);
    const McEstimate r = stein_identity_residual(sinf, gl, 100000, SeedSpec{1, {}});
    CHECK(std::abs(r.mean()) <= 3 * r.std_error());

    const TargetLaw cl = combinatorial_law(deterministic_model(5, 4));
    const auto c1 = parse_functional("cos:coord=1,t=2/5,1,scale=2", 1);
    const McEstimate rc = stein_identity_residual(c1, cl, 100000, SeedSpec{2, {}});
    CHECK(std::abs(rc.mean()) <= 3 * rc.std_error());

    // Negative control: a sampler that is 10% too wide breaks the identity for an even functional.
    const auto cos3 = parse_functional("cos:coord=2,t=1,scale=3", 2);
    const McEstimate ok = stein_identity_residual(cos3, gl, 100000, SeedSpec{3, {}});
    const McEstimate bad = stein_identity_residual(cos3, gl.with_sampler_scale(1.1), 100000, SeedSpec{3, {}});
    CHECK(std::abs(ok.mean()) <= 3 * ok.std_error());
    CHECK(std::abs(bad.mean()) > 3 * bad.std_error());
}

TEST_CASE("sampler and closed-form covariance agree") {
    const TargetLaw cl = combinatorial_law(ArrayModel::iid_gaussian(4));
    const std::vector<TimePoint> times{TimePoint(1, 4), TimePoint(3, 4)};
    const Eigen::MatrixXd K = cl.grid_covariance(times);
    RngStream rng(SeedSpec{9, {}});
    McEstimate e00, e01, e11;
    for (int k = 0; k < 100000; ++k) {
        const auto d = cl.sample(rng);
        const double a = d.evaluate(times[0])[0], b = d.evaluate(times[1])[0];
        e00.accumulate(a * a);
        e01.accumulate(a * b);
        e11.accumulate(b * b);
    }
    CHECK(std::abs(e00.mean() - K(0, 0)) <= 5 * e00.std_error());
    CHECK(std::abs(e01.mean() - K(0, 1)) <= 5 * e01.std_error());
    CHECK(std::abs(e11.mean() - K(1, 1)) <= 5 * e11.std_error());
    CHECK(K(0, 1) == doctest::Approx(K(1, 0)));
}

TEST_CASE("solve_phi") {
    const TargetLaw law = graph_law(GraphModel(3, 0.4));
    const auto w = fixed_path2();
    const auto cst = parse_functional("const:value=3", 2);
    const PhiSolution zero = solve_phi(cst, w, law, 64, 100, SeedSpec{1, {}});
    CHECK(zero.estimate.mean() == 0.0);
    CHECK(zero.quadrature_error == 0.0);
    CHECK_THROWS_AS(solve_phi(cst, w, law, 40, 100, SeedSpec{1, {}}), DomainError);

    const auto g = parse_functional("sin:coord=2,t=2/3,1", 2);
    const PhiSolution s64 = solve_phi(g, w, law, 64, 20000, SeedSpec{2, {}});
    CHECK(s64.self_check_pass());
    // The returned solution satisfies the Stein equation at w through the generator.
    const McEstimate eg = law.expectation(g, 20000, SeedSpec{2, {}});
    const double lhs = generator_apply(*s64.phi, w, law);
    CHECK(std::abs(lhs - (g.eval(w) - eg.mean())) <=
          4 * std::hypot(s64.self_check.std_error(), eg.std_error()) + s64.self_check_quadrature_error + 1e-9);
    // Richardson: doubling the nodes moves the estimate by less than the reported error.
    const PhiSolution s128 = solve_phi(g, w, law, 128, 20000, SeedSpec{2, {}});
    CHECK(std::abs(s128.estimate.mean() - s64.estimate.mean()) <= s64.quadrature_error + 1e-15);
    // Deterministic combinatorial law at n = 3.
    const TargetLaw cl = combinatorial_law(deterministic_model(3, 5));
    const auto gc = parse_functional("tanh:coord=1,t=1/3,1", 1);
    const PiecewiseConstantPath wc(1, {TimePoint(0, 1), TimePoint(1, 3)}, {0.0, 0.8});
    CHECK(solve_phi(gc, wc, cl, 64, 20000, SeedSpec{3, {}}).self_check_pass());
}

TEST_CASE("epsilon estimates") {
    const GraphModel gm(50, 0.3);
    const McEstimate raw = epsilon1_estimate(graph_pair_sampler(gm), lambda(gm), 6.0, 20000, SeedSpec{1, {}});
    CHECK(raw.mean() - 1.96 * raw.std_error() <= 5.0 / 50.0);
    const McEstimate none =
        epsilon1_estimate(graph_pair_sampler(gm), Eigen::Matrix2d::Zero(), 1.0, 100, SeedSpec{1, {}});
    CHECK(none.mean() == 0.0);

    const auto iid = ArrayModel::iid_gaussian(10);
    const McEstimate ce =
        epsilon1_estimate(combinatorial_pair_sampler(iid), combinatorial_lambda(10), 6.0, 20000, SeedSpec{2, {}});
    const double n = 10.0, s3 = std::pow(iid.s(), 3);
    const double chain = (n - 1) / 4.0 * 32.0 * n * n * 2.0 * std::sqrt(2.0 / M_PI) / (n * n * s3);
    CHECK(ce.mean() - 1.96 * ce.std_error() <= chain);

    const auto gf = parse_functional("sin:coord=1,t=1/2,1", 2);
    const McEstimate e3g = epsilon3_estimate(gm, gf, 50, SeedSpec{});
    CHECK(e3g.mean() == 0.0);
    CHECK(e3g.variance() == 0.0);

    const auto lin = parse_functional("lin:coords=1,1,t=1/3,1", 1);
    const McEstimate e3d = epsilon3_estimate(deterministic_model(6, 8), lin, 200, SeedSpec{3, {}});
    CHECK(std::abs(e3d.mean()) <= 1e-12);
    const auto sf = parse_functional("sin:coord=1,t=1/2,1", 1);
    const McEstimate e3r = epsilon3_estimate(iid, sf, 20000, SeedSpec{4, {}});
    const double gnorm = sf.norm_upper_bound(NormClass::M1).value;
    CHECK(std::abs(e3r.mean()) - 1.96 * e3r.std_error() <= 2 * gnorm / std::sqrt(n));
}
