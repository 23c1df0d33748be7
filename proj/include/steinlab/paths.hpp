#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace steinlab {

/// Exact rational time in [0,1]. Always stored in lowest terms with a positive denominator.
class TimePoint {
public:
    TimePoint() = default;
    TimePoint(std::int64_t num, std::int64_t den);

    /// Parses "p/q", an integer, or a finite decimal such as "0.37" (read exactly as 37/100).
    static TimePoint parse(const std::string& text);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    /// floor(n * t), computed in integer arithmetic.
    std::int64_t floor_mul(std::int64_t n) const;

    std::string to_string() const;

    friend bool operator==(const TimePoint& a, const TimePoint& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator<(const TimePoint& a, const TimePoint& b);
    friend bool operator<=(const TimePoint& a, const TimePoint& b) { return !(b < a); }
    friend bool operator>(const TimePoint& a, const TimePoint& b) { return b < a; }
    friend bool operator>=(const TimePoint& a, const TimePoint& b) { return !(a < b); }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

inline TimePoint min(const TimePoint& a, const TimePoint& b) { return b < a ? b : a; }

/// Right-continuous step function [0,1] -> R^dim.
///
/// Interval k is [breakpoints[k], breakpoints[k+1]); the last interval is closed at 1.
/// Values are stored interval-major: value(k) is a dim-vector.
/// Adjacent intervals with equal values are never merged.
class PiecewiseConstantPath {
public:
    using Breakpoints = std::vector<TimePoint>;

    PiecewiseConstantPath(std::size_t dim, std::vector<TimePoint> breakpoints,
                          std::vector<double> values);
    PiecewiseConstantPath(std::size_t dim, std::shared_ptr<const Breakpoints> breakpoints,
                          std::vector<double> values);

    static PiecewiseConstantPath zero(std::size_t dim);

    /// Path with breakpoints {0, 1/n, ..., n/n}; values holds (n+1)*dim numbers,
    /// the value on [i/n, (i+1)/n) at offset i*dim.
    static PiecewiseConstantPath on_uniform_grid(std::size_t dim, std::int64_t n,
                                                 std::vector<double> values);

    /// Shared breakpoint set {0, 1/n, ..., 1}; cached per n for cheap sampling.
    static std::shared_ptr<const Breakpoints> uniform_breakpoints(std::int64_t n);

    std::size_t dim() const { return dim_; }
    std::size_t intervals() const { return breakpoints_->size(); }
    const Breakpoints& breakpoints() const { return *breakpoints_; }
    const std::shared_ptr<const Breakpoints>& shared_breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

    Eigen::Map<const Eigen::VectorXd> value(std::size_t interval) const {
        return {values_.data() + interval * dim_, static_cast<Eigen::Index>(dim_)};
    }

    /// Index of the interval containing t (right-continuous).
    std::size_t interval_of(const TimePoint& t) const;

    Eigen::VectorXd evaluate(const TimePoint& t) const;

    /// Exact sup over t of the Euclidean norm.
    double sup_norm() const;

    PiecewiseConstantPath scaled(double a) const;

    /// Pointwise row-vector product w(t) * M, M of size dim x q.
    PiecewiseConstantPath times_matrix(const Eigen::MatrixXd& m) const;

    nlohmann::json to_json() const;
    static PiecewiseConstantPath from_json(const nlohmann::json& j);

private:
    std::size_t dim_;
    std::shared_ptr<const Breakpoints> breakpoints_;
    std::vector<double> values_;

    void validate() const;
};

/// a*x + b*y on the merged breakpoint set.
PiecewiseConstantPath lin_comb(double a, const PiecewiseConstantPath& x, double b,
                               const PiecewiseConstantPath& y);

/// 1_{[i/n, 1]} e_coord, with 1-based i and coord.
PiecewiseConstantPath step_indicator(std::int64_t i, std::int64_t n, std::int64_t coord,
                                     std::int64_t dim);

/// True when both paths agree at every breakpoint of either path.
bool paths_equal(const PiecewiseConstantPath& x, const PiecewiseConstantPath& y, double tol = 0.0);

} // namespace steinlab
