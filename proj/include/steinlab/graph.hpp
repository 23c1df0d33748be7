#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steinlab/functionals.hpp"
#include "steinlab/mc.hpp"
#include "steinlab/paths.hpp"

namespace steinlab {

/// Bernoulli random graph G(n, p) observed through its edge and two-star processes.
class GraphModel {
public:
    GraphModel(std::int64_t n, double p);

    static GraphModel from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    std::int64_t n() const { return n_; }
    double p() const { return p_; }

private:
    std::int64_t n_;
    double p_;
};

/// Edge indicators (upper triangle, row-major over i < j) and the centred path (T - ET, V - EV).
struct GraphRealization {
    std::int64_t n = 0;
    std::vector<std::uint8_t> edges;
    PiecewiseConstantPath path = PiecewiseConstantPath::zero(2);

    bool edge(std::int64_t i, std::int64_t j) const;  ///< 0-based, i != j
};

/// Index of edge {i, j} (0-based, i != j) in the upper-triangular layout.
std::size_t edge_index(std::int64_t n, std::int64_t i, std::int64_t j);

/// Builds the centred path from edge indicators.
PiecewiseConstantPath graph_path(const GraphModel& model, const std::vector<std::uint8_t>& edges);

GraphRealization sample_graph(const GraphModel& model, RngStream& rng);

/// (E T_n(t), E V_n(t)).
std::pair<double, double> moments_tv(const GraphModel& model, const TimePoint& t);

/// The rank-one covariance 3 (m-2) C(m,3) p(1-p)/n^4 [[1,2p],[2p,4p^2]], m = floor(nt).
Eigen::Matrix2d cov_tv(const GraphModel& model, const TimePoint& t);

/// Exact covariance of (T_n(t), V_n(t)) from counting overlapping edge pairs.
Eigen::Matrix2d exact_cov_tv(const GraphModel& model, const TimePoint& t);

/// Y' after replacing edge {i, j} (0-based, i < j) by `new_value`.
GraphRealization resample_edge(const GraphModel& model, const GraphRealization& r, std::int64_t i,
                               std::int64_t j, bool new_value);

struct GraphPair {
    GraphRealization y;
    GraphRealization y_prime;
    std::int64_t i = 0, j = 0;
    bool new_value = false;
};

GraphPair sample_pair(const GraphModel& model, RngStream& rng);

/// Lambda_n = (n(n-1)/8) [[2, 2p], [0, 1]].
Eigen::Matrix2d lambda(const GraphModel& model);

/// |Df(Y)[Y] - 2 E^Y Df(Y)[(Y - Y') Lambda]| with the conditional expectation enumerated exactly.
double regression_residual(const GraphModel& model, const GraphRealization& r,
                           const CylinderFunctional& f);

/// Closed-form covariances of the Gaussian pre-limit D_n = (D^(1), D^(2)).
class PrelimitCovariance {
public:
    explicit PrelimitCovariance(const GraphModel& model) : model_(model) {}

    double d1d1(const TimePoint& t, const TimePoint& u) const;
    /// E D^(1)(t) D^(2)(u).
    double d1d2(const TimePoint& t, const TimePoint& u) const;
    double d2d2(const TimePoint& t, const TimePoint& u) const;

    /// E D(t) D(u)^T.
    Eigen::Matrix2d block(const TimePoint& t, const TimePoint& u) const;

    /// The same quantities evaluated from the Brownian representation: sum over the driving
    /// motions of coefficient products times the minimum of the evaluation times.
    double brownian_d1d1(const TimePoint& t, const TimePoint& u) const;
    double brownian_d1d2(const TimePoint& t, const TimePoint& u) const;
    double brownian_d2d2(const TimePoint& t, const TimePoint& u) const;

    /// Grid covariance of (D(t_1), ..., D(t_m)) as a 2m x 2m matrix.
    Eigen::MatrixXd grid_matrix(const std::vector<TimePoint>& grid) const;

private:
    GraphModel model_;
};

PrelimitCovariance prelimit_cov(const GraphModel& model);

/// Coefficients of the limit process: Z1 = t(alpha B1 + beta B2)(t^2), Z2 = t(beta B1 + gamma B2)(t^2).
struct LimitCoefficients {
    double alpha, beta, gamma;
};
LimitCoefficients limit_coefficients(double p);

/// Pre-limit sample through independent Brownian motions (exactly the law of D_n).
PiecewiseConstantPath sample_dn(const GraphModel& model, RngStream& rng);

/// Pre-limit sample from the explicit Gaussian family of pair/triple variables (small n only).
class DirectGaussianOracle {
public:
    explicit DirectGaussianOracle(const GraphModel& model);

    PiecewiseConstantPath sample(RngStream& rng) const;
    double min_eigenvalue() const { return min_eigenvalue_; }
    std::size_t variables() const { return static_cast<std::size_t>(root_.rows()); }

private:
    GraphModel model_;
    Eigen::MatrixXd root_;
    double min_eigenvalue_ = 0.0;
    std::vector<std::array<std::int64_t, 2>> pairs_;
    std::vector<std::array<std::int64_t, 3>> triples_;
};

/// Limit process sampled at the grid times (values on [t_k, t_{k+1})).
PiecewiseConstantPath sample_z(double p, const std::vector<TimePoint>& grid, RngStream& rng);

double bound_prelimit(std::int64_t n, double gnorm_m2);
double bound_continuous(std::int64_t n, double gnorm_m2);

struct CouplingReport {
    McEstimate dist;         ///< sup |Z_n - Z|
    McEstimate dist_sq;      ///< sup |Z_n - Z|^2
    McEstimate limit_sq;     ///< sup |Z|^2
    McEstimate grid_bias;    ///< sup on the 8x refined grid minus sup on the 4x grid
    double corr_first = 0.0; ///< correlation of Z_n^(1)(1) and Z^(1)(1)
    double bound_dist = 0.0, bound_dist_sq = 0.0, bound_limit_sq = 5.0;
    bool pass_dist = false, pass_dist_sq = false, pass_limit_sq = false;
};

/// Moments of the sup distance between the pre-limit and limit processes under the shared
/// Brownian coupling.
CouplingReport coupling_distance(const GraphModel& model, std::size_t samples, const SeedSpec& seed,
                                 unsigned workers = 1);

} // namespace steinlab
