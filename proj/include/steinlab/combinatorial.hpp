#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steinlab/functionals.hpp"
#include "steinlab/mc.hpp"
#include "steinlab/paths.hpp"

namespace steinlab {

enum class EntryDist { Constant, Gaussian, RademacherShifted, TwoPoint };

/// Law of one array entry X_ij.
///
///   Constant:          value a
///   Gaussian:          N(a, b^2)             (a = mean, b = standard deviation)
///   RademacherShifted: a +- b with prob 1/2
///   TwoPoint:          a with prob q, b with prob 1-q
struct EntrySpec {
    EntryDist dist = EntryDist::Constant;
    double a = 0.0;
    double b = 0.0;
    double q = 0.5;

    static EntrySpec constant(double v) { return {EntryDist::Constant, v, 0.0, 0.5}; }
    static EntrySpec gaussian(double mean, double sd) { return {EntryDist::Gaussian, mean, sd, 0.5}; }
    static EntrySpec rademacher_shifted(double mean, double scale) {
        return {EntryDist::RademacherShifted, mean, scale, 0.5};
    }
    static EntrySpec two_point(double x1, double x2, double q) { return {EntryDist::TwoPoint, x1, x2, q}; }

    double mean() const;
    double variance() const;
    /// E|X|^k for k = 1, 2, 3.
    double abs_moment(int k) const;
    double sample(RngStream& rng) const;

    nlohmann::json to_json() const;
};

/// Per-entry moment tables used by the bound evaluators.
struct MomentTables {
    Eigen::MatrixXd abs1, abs2, abs3;  ///< E|X|, E|X|^2, E|X|^3
    Eigen::MatrixXd mean;              ///< c_ij
    Eigen::MatrixXd variance;          ///< sigma_ij^2
    double s = 1.0;                    ///< s_n
};

/// n x n array of independent entries with doubly-centred means.
class ArrayModel {
public:
    /// Validates centring, moment consistency and s_n^2 > 0.
    ArrayModel(std::size_t n, std::vector<EntrySpec> entries);

    static ArrayModel iid_gaussian(std::size_t n, double sigma = 1.0);
    static ArrayModel deterministic(const Eigen::MatrixXd& x);
    static ArrayModel from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    std::size_t n() const { return n_; }
    const EntrySpec& entry(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }

    Eigen::MatrixXd mean_matrix() const;
    Eigen::MatrixXd variance_matrix() const;
    Eigen::MatrixXd abs_moment_matrix(int k) const;
    MomentTables moments() const;

    double s() const { return s_; }
    bool is_deterministic() const;

    Eigen::MatrixXd sample_array(RngStream& rng) const;

private:
    std::size_t n_;
    std::vector<EntrySpec> entries_;
    double s_ = 0.0;
};

/// c - row means - column means + grand mean.
Eigen::MatrixXd double_center(const Eigen::MatrixXd& c);

double s_n_squared(const ArrayModel& model);

struct CombinatorialRealization {
    Eigen::MatrixXd x;             ///< sampled array
    std::vector<std::size_t> pi;   ///< permutation, 0-based: row i uses column pi[i]
    double s = 1.0;
    PiecewiseConstantPath path = PiecewiseConstantPath::zero(1);
};

/// Y_n(t) = (1/s) sum_{i <= floor(nt)} x_{i, pi(i)}.
PiecewiseConstantPath combinatorial_path(const Eigen::MatrixXd& x, const std::vector<std::size_t>& pi,
                                         double s);

CombinatorialRealization sample_y(const ArrayModel& model, RngStream& rng);

/// Realization with pi(I) and pi(J) exchanged (0-based I != J).
CombinatorialRealization swap_pair(const CombinatorialRealization& r, std::size_t i, std::size_t j);

struct CombinatorialPair {
    CombinatorialRealization y;
    CombinatorialRealization y_prime;
    std::size_t i = 0, j = 0;  ///< 0-based swapped rows
};

CombinatorialPair sample_pair(const ArrayModel& model, RngStream& rng);

/// (n-1)/4 as a 1x1 matrix.
Eigen::MatrixXd combinatorial_lambda(std::size_t n);

/// |mean over ordered pairs of Df(Y)[Y - Y'] - (2/(n-1))(Df(Y)[Y] - (1/(ns)) sum_ij Df(Y)[X_{i pi(j)} 1_{[i/n,1]}])|.
double regression_residual(const CombinatorialRealization& r, const CylinderFunctional& f);

/// Covariance E Zhat_i Zhat_j, 1-based indices.
double zhat_cov(const ArrayModel& model, std::size_t i, std::size_t j);

/// The same covariance through the symmetrised difference expressions.
double zhat_cov_difference_form(const ArrayModel& model, std::size_t i, std::size_t j);

/// Zhat_i = (n-1)^{-1/2} sum_l X''_il (Z_il - mean_r Z_rl).
Eigen::VectorXd sample_zhat(const ArrayModel& model, RngStream& rng);

/// D_n(t) = (1/s) sum_{i <= floor(nt)} Zhat_i.
PiecewiseConstantPath sample_dn(const ArrayModel& model, RngStream& rng);

/// E D_n(t) D_n(u).
double dn_covariance(const ArrayModel& model, const TimePoint& t, const TimePoint& u);

struct Theorem51Bound {
    double sum_term = 0.0;       ///< the five-index sum with its prefactor
    double root_term = 0.0;      ///< 2 |g| / sqrt(n)
    double variance_term = 0.0;  ///< 4 |g| sum sigma^2 / (3 n s^2)
    double total = 0.0;
    /// 4 |g| sum E|X|^3 / (3 n s^3), the alternative last term, and the total using it.
    double third_moment_term = 0.0;
    double total_third_moment_variant = 0.0;
};

/// Pre-limit distance bound for the permutation process; `naive` selects the O(n^5) evaluator.
Theorem51Bound theorem51_terms(const MomentTables& m, double gnorm_m1, bool naive = false);
double bound_theorem51(const ArrayModel& model, double gnorm_m1, bool naive = false);

/// Simplified bound under E|X_ik|^3 <= beta3.
double bound_beta3(std::size_t n, double s_n, double beta3, const Eigen::MatrixXd& c,
                   double sigma_sq_total, double gnorm_m1);

struct AssumptionRow {
    TimePoint u, t;
    double lhs1 = 0.0;
    double lhs2 = 0.0;
};

/// Finite-n left-hand sides of the two covariance-convergence assumptions on a (u,t) grid.
std::vector<AssumptionRow> assumption_diagnostic(const ArrayModel& model,
                                                 const std::vector<TimePoint>& grid);

} // namespace steinlab
