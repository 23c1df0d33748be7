#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "steinlab/combinatorial.hpp"
#include "steinlab/functionals.hpp"
#include "steinlab/graph.hpp"
#include "steinlab/mc.hpp"
#include "steinlab/paths.hpp"

namespace steinlab {

/// Gaussian pre-limit law D_n: a sampler, its closed-form covariance, and a write-once cache of
/// E g(D_n) estimates.
class TargetLaw {
public:
    using Sampler = std::function<PiecewiseConstantPath(RngStream&)>;
    /// E D(s) D(t)^T as a dim x dim matrix.
    using Covariance = std::function<Eigen::MatrixXd(const TimePoint&, const TimePoint&)>;

    TargetLaw(std::size_t dim, Sampler sampler, Covariance covariance, std::string name);

    std::size_t dim() const { return dim_; }
    const std::string& name() const { return name_; }

    PiecewiseConstantPath sample(RngStream& rng) const { return sampler_(rng); }
    Eigen::MatrixXd covariance(const TimePoint& s, const TimePoint& t) const { return covariance_(s, t); }

    /// Covariance of (D(t_1), ..., D(t_k)) stacked block-wise, (k*dim) x (k*dim).
    Eigen::MatrixXd grid_covariance(const std::vector<TimePoint>& times) const;

    /// A law whose sampler returns c * D while the covariance is left unchanged (negative control).
    TargetLaw with_sampler_scale(double c) const;

    /// MC estimate of E g(D_n); the first computation for a (functional, samples, seed) key is
    /// cached and returned thereafter.
    McEstimate expectation(const CylinderFunctional& g, std::size_t samples, const SeedSpec& seed,
                           unsigned workers = 1) const;

private:
    struct Cache {
        std::mutex mutex;
        std::map<std::string, McEstimate> values;
    };

    std::size_t dim_;
    Sampler sampler_;
    Covariance covariance_;
    std::string name_;
    std::shared_ptr<Cache> cache_;
};

TargetLaw graph_law(const GraphModel& model);
TargetLaw combinatorial_law(const ArrayModel& model);

/// (T_u g)(w) = E g(w e^{-u} + sqrt(1 - e^{-2u}) D_n); u = 0 returns g(w) with zero variance.
McEstimate mehler_apply(const CylinderFunctional& g, const PiecewiseConstantPath& w, double u,
                        const TargetLaw& law, std::size_t inner_samples, const SeedSpec& seed,
                        unsigned workers = 1);

/// A f(w) = -Df(w)[w] + E D^2 f(w)[D_n, D_n], the second term from the closed-form covariance.
double generator_apply(const CylinderFunctional& f, const PiecewiseConstantPath& w, const TargetLaw& law);

/// MC mean of A f(D_n) over draws of D_n from the law's sampler.
McEstimate stein_identity_residual(const CylinderFunctional& f, const TargetLaw& law,
                                   std::size_t samples, const SeedSpec& seed, unsigned workers = 1);

struct PhiSolution {
    McEstimate estimate;             ///< phi(g)(w), MC over inner draws at the full node count
    double quadrature_error = 0.0;   ///< |Q_N - Q_{N/2}| on the same draws
    /// The solution as a cylinder functional on g's times (same inner draws and nodes).
    std::shared_ptr<const CylinderFunctional> phi;
    /// Per-draw A phi(w) - (g(w) - E g); should be centred at 0.
    McEstimate self_check;
    double self_check_quadrature_error = 0.0;
    /// |self_check mean| <= 4 stderr + quadrature error.
    bool self_check_pass() const;
};

/// phi(g)(w) = -int_0^inf T_u (g - E g)(w) du, via v = e^{-u} and composite 8-point
/// Gauss-Legendre on (0, 1]; quad_points must be a multiple of 16.
PhiSolution solve_phi(const CylinderFunctional& g, const PiecewiseConstantPath& w, const TargetLaw& law,
                      std::size_t quad_points, std::size_t inner_samples, const SeedSpec& seed,
                      unsigned workers = 1);

using PairSampler = std::function<std::pair<PiecewiseConstantPath, PiecewiseConstantPath>(RngStream&)>;

/// (|g| / 6) E |(Y - Y') Lambda| |Y - Y'|^2 (sup norms).
McEstimate epsilon1_estimate(const PairSampler& pair_sampler, const Eigen::MatrixXd& lambda,
                             double gnorm, std::size_t samples, const SeedSpec& seed, unsigned workers = 1);

/// Regression remainder E R_f: zero for the graph model.
McEstimate epsilon3_estimate(const GraphModel& model, const CylinderFunctional& f, std::size_t samples,
                             const SeedSpec& seed, unsigned workers = 1);
/// (1/(n s)) sum_{i,j} Df(Y)[X_{i,pi(j)} 1_{[i/n,1]}] averaged over (X, pi).
McEstimate epsilon3_estimate(const ArrayModel& model, const CylinderFunctional& f, std::size_t samples,
                             const SeedSpec& seed, unsigned workers = 1);

PairSampler graph_pair_sampler(const GraphModel& model);
PairSampler combinatorial_pair_sampler(const ArrayModel& model);

} // namespace steinlab
