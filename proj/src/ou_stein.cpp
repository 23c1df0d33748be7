#include "steinlab/ou_stein.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "steinlab/errors.hpp"

namespace steinlab {

TargetLaw::TargetLaw(std::size_t dim, Sampler sampler, Covariance covariance, std::string name)
    : dim_(dim), sampler_(std::move(sampler)), covariance_(std::move(covariance)), name_(std::move(name)),
      cache_(std::make_shared<Cache>()) {
    if (dim_ == 0) throw DimensionError("target law needs dim >= 1");
}

Eigen::MatrixXd TargetLaw::grid_covariance(const std::vector<TimePoint>& times) const {
    const auto k = static_cast<Eigen::Index>(times.size());
    const auto p = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd K(k * p, k * p);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            const Eigen::MatrixXd c = covariance_(times[static_cast<std::size_t>(a)], times[static_cast<std::size_t>(b)]);
            if (c.rows() != p || c.cols() != p) throw DimensionError("covariance block has wrong shape");
            K.block(a * p, b * p, p, p) = c;
        }
    return K;
}

TargetLaw TargetLaw::with_sampler_scale(double c) const {
    Sampler base = sampler_;
    std::ostringstream nm;
    nm << name_ << "*" << c;
    return TargetLaw(
        dim_, [base, c](RngStream& rng) { return base(rng).scaled(c); }, covariance_, nm.str());
}

McEstimate TargetLaw::expectation(const CylinderFunctional& g, std::size_t samples, const SeedSpec& seed,
                                  unsigned workers) const {
    if (g.dim() != dim_) throw DimensionError("functional and law dimensions differ");
    std::ostringstream key;
    key << g.name() << "|" << samples << "|" << seed.root;
    for (auto p : seed.path) key << "." << p;
    {
        std::lock_guard<std::mutex> lock(cache_->mutex);
        auto it = cache_->values.find(key.str());
        if (it != cache_->values.end()) return it->second;
    }
    const McEstimate est = monte_carlo(
        samples, seed, workers,
        [&](RngStream& rng, McEstimate& acc) { acc.accumulate(g.eval(sampler_(rng))); }, McEstimate{});
    std::lock_guard<std::mutex> lock(cache_->mutex);
    return cache_->values.emplace(key.str(), est).first->second;
}

TargetLaw graph_law(const GraphModel& model) {
    const PrelimitCovariance cov(model);
    std::ostringstream nm;
    nm << "graph(n=" << model.n() << ",p=" << model.p() << ")";
    return TargetLaw(
        2, [model](RngStream& rng) { return sample_dn(model, rng); },
        [cov](const TimePoint& s, const TimePoint& t) { return Eigen::MatrixXd(cov.block(s, t)); }, nm.str());
}

TargetLaw combinatorial_law(const ArrayModel& model) {
    std::ostringstream nm;
    nm << "combinatorial(n=" << model.n() << ")";
    return TargetLaw(
        1, [model](RngStream& rng) { return sample_dn(model, rng); },
        [model](const TimePoint& s, const TimePoint& t) {
            Eigen::MatrixXd m(1, 1);
            m(0, 0) = dn_covariance(model, s, t);
            return m;
        },
        nm.str());
}

namespace {

void check_law(const CylinderFunctional& f, const TargetLaw& law) {
    if (f.dim() != law.dim()) throw DimensionError("functional and law dimensions differ");
}

double generator_at(const SmoothMap& base, const Eigen::VectorXd& x, const Eigen::MatrixXd& K) {
    return -base.gradient(x).dot(x) + base.hessian(x).cwiseProduct(K).sum();
}

// Coordinates of inner draws of D_n at a fixed set of times; merges by appending in chunk order.
struct SampleBank {
    std::vector<Eigen::VectorXd> rows;
    void merge(const SampleBank& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
};

struct Rule {
    std::vector<double> nodes, weights;
};

// Composite Gauss-Legendre on [0,1] with `points` nodes in 8-point panels.
Rule composite_rule(std::size_t points) {
    using G = boost::math::quadrature::gauss<double, 8>;
    const auto& xs = G::abscissa();
    const auto& ws = G::weights();
    const std::size_t panels = points / 8;
    Rule r;
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = static_cast<double>(p) / static_cast<double>(panels);
        const double b = static_cast<double>(p + 1) / static_cast<double>(panels);
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            for (double sgn : {-1.0, 1.0}) {
                r.nodes.push_back(mid + sgn * half * xs[k]);
                r.weights.push_back(half * ws[k]);
            }
        }
    }
    return r;
}

// phi(x) = -mean_s sum_q w_q [ (g(v x + r D_s) + g(v x - r D_s))/2 - c_s ] / v_q,  r = sqrt(1 - v^2)
class PhiMap final : public SmoothMap {
public:
    PhiMap(std::shared_ptr<const SmoothMap> g, std::vector<Eigen::VectorXd> draws, Rule rule)
        : g_(std::move(g)), draws_(std::move(draws)), rule_(std::move(rule)) {
        for (const auto& d : draws_) centre_.push_back(0.5 * (g_->value(d) + g_->value(-d)));
    }

    std::size_t input_size() const override { return g_->input_size(); }

    double value(const Eigen::VectorXd& x) const override {
        double acc = 0.0;
        for (std::size_t s = 0; s < draws_.size(); ++s)
            for (std::size_t q = 0; q < rule_.nodes.size(); ++q) {
                const double v = rule_.nodes[q], r = std::sqrt(1.0 - v * v);
                const double avg = 0.5 * (g_->value(v * x + r * draws_[s]) + g_->value(v * x - r * draws_[s]));
                acc += rule_.weights[q] * (avg - centre_[s]) / v;
            }
        return -acc / static_cast<double>(draws_.size());
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
        for (const auto& d : draws_)
            for (std::size_t q = 0; q < rule_.nodes.size(); ++q) {
                const double v = rule_.nodes[q], r = std::sqrt(1.0 - v * v);
                acc += rule_.weights[q] * 0.5 * (g_->gradient(v * x + r * d) + g_->gradient(v * x - r * d));
            }
        return -acc / static_cast<double>(draws_.size());
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(x.size(), x.size());
        for (const auto& d : draws_)
            for (std::size_t q = 0; q < rule_.nodes.size(); ++q) {
                const double v = rule_.nodes[q], r = std::sqrt(1.0 - v * v);
                acc += rule_.weights[q] * v * 0.5 * (g_->hessian(v * x + r * d) + g_->hessian(v * x - r * d));
            }
        return -acc / static_cast<double>(draws_.size());
    }

private:
    std::shared_ptr<const SmoothMap> g_;
    std::vector<Eigen::VectorXd> draws_;
    std::vector<double> centre_;
    Rule rule_;
};

} // namespace

McEstimate mehler_apply(const CylinderFunctional& g, const PiecewiseConstantPath& w, double u,
                        const TargetLaw& law, std::size_t inner_samples, const SeedSpec& seed,
                        unsigned workers) {
    check_law(g, law);
    if (!(u >= 0.0) || !std::isfinite(u)) throw DomainError("semigroup time must be finite and >= 0");
    const Eigen::VectorXd x = g.coordinates(w);
    if (u == 0.0) return McEstimate::constant(g.base().value(x), inner_samples);
    const double a = std::exp(-u), b = std::sqrt(-std::expm1(-2.0 * u));
    return monte_carlo(
        inner_samples, seed, workers,
        [&](RngStream& rng, McEstimate& acc) {
            const Eigen::VectorXd d = g.coordinates(law.sample(rng));
            acc.accumulate(g.base().value(a * x + b * d));
        },
        McEstimate{});
}

double generator_apply(const CylinderFunctional& f, const PiecewiseConstantPath& w, const TargetLaw& law) {
    check_law(f, law);
    return generator_at(f.base(), f.coordinates(w), law.grid_covariance(f.times()));
}

McEstimate stein_identity_residual(const CylinderFunctional& f, const TargetLaw& law, std::size_t samples,
                                   const SeedSpec& seed, unsigned workers) {
    check_law(f, law);
    const Eigen::MatrixXd K = law.grid_covariance(f.times());
    return monte_carlo(
        samples, seed, workers,
        [&](RngStream& rng, McEstimate& acc) {
            acc.accumulate(generator_at(f.base(), f.coordinates(law.sample(rng)), K));
        },
        McEstimate{});
}

bool PhiSolution::self_check_pass() const {
    return std::abs(self_check.mean()) <= 4.0 * self_check.std_error() + self_check_quadrature_error;
}

PhiSolution solve_phi(const CylinderFunctional& g, const PiecewiseConstantPath& w, const TargetLaw& law,
                      std::size_t quad_points, std::size_t inner_samples, const SeedSpec& seed,
                      unsigned workers) {
    check_law(g, law);
    if (quad_points < 16 || quad_points % 16 != 0)
        throw DomainError("quad_points must be a positive multiple of 16");
    if (inner_samples < 2) throw InsufficientDataError("solve_phi needs at least two inner samples");
    const Eigen::VectorXd x = g.coordinates(w);
    const Eigen::MatrixXd K = law.grid_covariance(g.times());
    const SampleBank bank = monte_carlo(
        inner_samples, seed, workers,
        [&](RngStream& rng, SampleBank& acc) { acc.rows.push_back(g.coordinates(law.sample(rng))); },
        SampleBank{});
    const Rule full = composite_rule(quad_points), half = composite_rule(quad_points / 2);
    const SmoothMap& base = g.base();
    const double gx = base.value(x);

    McEstimate est_full, est_half, chk_full, chk_half;
    for (const auto& d : bank.rows) {
        const double c = 0.5 * (base.value(d) + base.value(-d));
        auto integrate = [&](const Rule& rule, McEstimate& phi_acc, McEstimate& chk_acc) {
            double phi = 0.0, q_sum = 0.0;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double v = rule.nodes[q], r = std::sqrt(1.0 - v * v);
                const Eigen::VectorXd xp = v * x + r * d, xm = v * x - r * d;
                phi += rule.weights[q] * (0.5 * (base.value(xp) + base.value(xm)) - c) / v;
                const double grad_term = 0.5 * (base.gradient(xp) + base.gradient(xm)).dot(x);
                const double hess_term = 0.5 * (base.hessian(xp) + base.hessian(xm)).cwiseProduct(K).sum();
                q_sum += rule.weights[q] * (grad_term - v * hess_term);
            }
            phi_acc.accumulate(-phi);
            chk_acc.accumulate(q_sum - (gx - c));
        };
        integrate(full, est_full, chk_full);
        integrate(half, est_half, chk_half);
    }

    PhiSolution sol;
    sol.estimate = est_full;
    sol.quadrature_error = std::abs(est_full.mean() - est_half.mean());
    sol.self_check = chk_full;
    sol.self_check_quadrature_error = std::abs(chk_full.mean() - chk_half.mean());
    auto map = std::make_shared<PhiMap>(g.shared_base(), bank.rows, full);
    sol.phi = std::make_shared<CylinderFunctional>(g.dim(), g.times(), std::move(map), "phi(" + g.name() + ")");
    return sol;
}

McEstimate epsilon1_estimate(const PairSampler& pair_sampler, const Eigen::MatrixXd& lambda, double gnorm,
                             std::size_t samples, const SeedSpec& seed, unsigned workers) {
    if (gnorm < 0.0) throw DomainError("functional norm must be non-negative");
    return monte_carlo(
        samples, seed, workers,
        [&](RngStream& rng, McEstimate& acc) {
            const auto [y, yp] = pair_sampler(rng);
            const PiecewiseConstantPath d = lin_comb(1.0, y, -1.0, yp);
            const double dn = d.sup_norm();
            acc.accumulate(gnorm / 6.0 * d.times_matrix(lambda).sup_norm() * dn * dn);
        },
        McEstimate{});
}

McEstimate epsilon3_estimate(const GraphModel&, const CylinderFunctional& f, std::size_t samples,
                             const SeedSpec&, unsigned) {
    if (f.dim() != 2) throw DimensionError("graph functionals act on 2-dimensional paths");
    return McEstimate::constant(0.0, samples);
}

McEstimate epsilon3_estimate(const ArrayModel& model, const CylinderFunctional& f, std::size_t samples,
                             const SeedSpec& seed, unsigned workers) {
    if (f.dim() != 1) throw DimensionError("combinatorial functionals act on 1-dimensional paths");
    const auto n = static_cast<std::int64_t>(model.n());
    return monte_carlo(
        samples, seed, workers,
        [&](RngStream& rng, McEstimate& acc) {
            const CombinatorialRealization r = sample_y(model, rng);
            // sum_j X_{i,pi(j)} is the i-th row sum whatever pi is.
            const Eigen::VectorXd rows = r.x.rowwise().sum();
            double total = 0.0;
            for (std::int64_t i = 1; i <= n; ++i)
                total += rows[static_cast<Eigen::Index>(i - 1)] * f.dderiv(r.path, step_indicator(i, n, 1, 1));
            acc.accumulate(total / (static_cast<double>(n) * r.s));
        },
        McEstimate{});
}

PairSampler graph_pair_sampler(const GraphModel& model) {
    return [model](RngStream& rng) {
        GraphPair gp = sample_pair(model, rng);
        return std::make_pair(std::move(gp.y.path), std::move(gp.y_prime.path));
    };
}

PairSampler combinatorial_pair_sampler(const ArrayModel& model) {
    return [model](RngStream& rng) {
        CombinatorialPair cp = sample_pair(model, rng);
        return std::make_pair(std::move(cp.y.path), std::move(cp.y_prime.path));
    };
}

} // namespace steinlab
