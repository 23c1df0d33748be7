#include "steinlab/paths.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "steinlab/errors.hpp"

namespace steinlab {

TimePoint::TimePoint(std::int64_t num, std::int64_t den) {
    if (den == 0) throw DomainError("time point with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    if (num < 0 || num > den)
        throw DomainError("time point " + std::to_string(num) + "/" + std::to_string(den) +
                          " outside [0,1]");
    const std::int64_t g = std::gcd(num, den);
    num_ = num / g;
    den_ = den / g;
}

TimePoint TimePoint::parse(const std::string& text) {
    auto fail = [&]() -> TimePoint { throw DomainError("cannot parse time point '" + text + "'"); };
    if (text.empty()) return fail();
    const auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            std::size_t used = 0;
            const auto num = std::stoll(text.substr(0, slash), &used);
            if (used != slash) return fail();
            const auto den_text = text.substr(slash + 1);
            const auto den = std::stoll(den_text, &used);
            if (used != den_text.size()) return fail();
            return {num, den};
        }
        const auto dot = text.find('.');
        if (dot == std::string::npos) {
            std::size_t used = 0;
            const auto v = std::stoll(text, &used);
            if (used != text.size()) return fail();
            return {v, 1};
        }
        const std::string whole = text.substr(0, dot);
        const std::string frac = text.substr(dot + 1);
        if (frac.size() > 15 || frac.find_first_not_of("0123456789") != std::string::npos)
            return fail();
        if (!whole.empty() && whole.find_first_not_of("0123456789") != std::string::npos)
            return fail();
        std::int64_t den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        const std::int64_t w = whole.empty() ? 0 : std::stoll(whole);
        const std::int64_t f = frac.empty() ? 0 : std::stoll(frac);
        return {w * den + f, den};
    } catch (const std::logic_error&) {
        return fail();
    }
}

std::int64_t TimePoint::floor_mul(std::int64_t n) const {
    // num/den in [0,1] and n >= 0 give a non-negative product, so integer division floors.
    const __int128 prod = static_cast<__int128>(num_) * n;
    return static_cast<std::int64_t>(prod / den_);
}

std::string TimePoint::to_string() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

bool operator<(const TimePoint& a, const TimePoint& b) {
    return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
}

// ---------------------------------------------------------------------------

PiecewiseConstantPath::PiecewiseConstantPath(std::size_t dim, std::vector<TimePoint> breakpoints,
                                             std::vector<double> values)
    : PiecewiseConstantPath(dim, std::make_shared<const Breakpoints>(std::move(breakpoints)),
                            std::move(values)) {}

PiecewiseConstantPath::PiecewiseConstantPath(std::size_t dim,
                                             std::shared_ptr<const Breakpoints> breakpoints,
                                             std::vector<double> values)
    : dim_(dim), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    validate();
}

void PiecewiseConstantPath::validate() const {
    if (dim_ == 0) throw DimensionError("path dimension must be positive");
    if (!breakpoints_ || breakpoints_->empty()) throw DomainError("path needs at least one breakpoint");
    const auto& b = *breakpoints_;
    if (!(b.front() == TimePoint(0, 1))) throw DomainError("first breakpoint must be 0");
    for (std::size_t k = 1; k < b.size(); ++k)
        if (!(b[k - 1] < b[k])) throw DomainError("breakpoints must be strictly increasing");
    if (values_.size() != b.size() * dim_)
        throw DimensionError("path has " + std::to_string(values_.size()) + " values for " +
                             std::to_string(b.size()) + " intervals of dimension " +
                             std::to_string(dim_));
    for (double v : values_)
        if (!std::isfinite(v)) throw DataError("path values must be finite");
}

PiecewiseConstantPath PiecewiseConstantPath::zero(std::size_t dim) {
    return PiecewiseConstantPath(dim, std::vector<TimePoint>{TimePoint(0, 1)},
                                 std::vector<double>(dim, 0.0));
}

std::shared_ptr<const PiecewiseConstantPath::Breakpoints>
PiecewiseConstantPath::uniform_breakpoints(std::int64_t n) {
    if (n < 1) throw DomainError("uniform grid needs n >= 1");
    static std::mutex mutex;
    static std::map<std::int64_t, std::shared_ptr<const Breakpoints>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Breakpoints b;
    b.reserve(static_cast<std::size_t>(n) + 1);
    for (std::int64_t i = 0; i <= n; ++i) b.emplace_back(i, n);
    auto ptr = std::make_shared<const Breakpoints>(std::move(b));
    cache.emplace(n, ptr);
    return ptr;
}

PiecewiseConstantPath PiecewiseConstantPath::on_uniform_grid(std::size_t dim, std::int64_t n,
                                                             std::vector<double> values) {
    return PiecewiseConstantPath(dim, uniform_breakpoints(n), std::move(values));
}

std::size_t PiecewiseConstantPath::interval_of(const TimePoint& t) const {
    const auto& b = *breakpoints_;
    auto it = std::upper_bound(b.begin(), b.end(), t);
    return static_cast<std::size_t>(it - b.begin()) - 1;
}

Eigen::VectorXd PiecewiseConstantPath::evaluate(const TimePoint& t) const {
    return value(interval_of(t));
}

double PiecewiseConstantPath::sup_norm() const {
    double best = 0.0;
    for (std::size_t k = 0; k < intervals(); ++k) best = std::max(best, value(k).norm());
    return best;
}

PiecewiseConstantPath PiecewiseConstantPath::scaled(double a) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= a;
    return PiecewiseConstantPath(dim_, breakpoints_, std::move(v));
}

PiecewiseConstantPath PiecewiseConstantPath::times_matrix(const Eigen::MatrixXd& m) const {
    if (static_cast<std::size_t>(m.rows()) != dim_)
        throw DimensionError("matrix rows do not match path dimension");
    const auto q = static_cast<std::size_t>(m.cols());
    std::vector<double> v(intervals() * q);
    for (std::size_t k = 0; k < intervals(); ++k) {
        Eigen::Map<Eigen::VectorXd> out(v.data() + k * q, static_cast<Eigen::Index>(q));
        out = m.transpose() * value(k);
    }
    return PiecewiseConstantPath(q, breakpoints_, std::move(v));
}

nlohmann::json PiecewiseConstantPath::to_json() const {
    nlohmann::json j;
    j["dim"] = dim_;
    auto bps = nlohmann::json::array();
    for (const auto& t : *breakpoints_) bps.push_back({t.num(), t.den()});
    j["breakpoints"] = bps;
    auto vals = nlohmann::json::array();
    for (std::size_t k = 0; k < intervals(); ++k) {
        auto row = nlohmann::json::array();
        for (std::size_t c = 0; c < dim_; ++c) row.push_back(values_[k * dim_ + c]);
        vals.push_back(row);
    }
    j["values"] = vals;
    return j;
}

PiecewiseConstantPath PiecewiseConstantPath::from_json(const nlohmann::json& j) {
    try {
        const auto dim = j.at("dim").get<std::size_t>();
        std::vector<TimePoint> bps;
        for (const auto& b : j.at("breakpoints"))
            bps.emplace_back(b.at(0).get<std::int64_t>(), b.at(1).get<std::int64_t>());
        std::vector<double> vals;
        for (const auto& row : j.at("values")) {
            if (row.size() != dim) throw DimensionError("path value row has wrong dimension");
            for (const auto& x : row) vals.push_back(x.get<double>());
        }
        return PiecewiseConstantPath(dim, std::move(bps), std::move(vals));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed path JSON: ") + e.what());
    }
}

PiecewiseConstantPath lin_comb(double a, const PiecewiseConstantPath& x, double b,
                               const PiecewiseConstantPath& y) {
    if (x.dim() != y.dim()) throw DimensionError("lin_comb: dimension mismatch");
    const std::size_t d = x.dim();
    if (x.shared_breakpoints() == y.shared_breakpoints() || x.breakpoints() == y.breakpoints()) {
        std::vector<double> v(x.values().size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * x.values()[i] + b * y.values()[i];
        return PiecewiseConstantPath(d, x.shared_breakpoints(), std::move(v));
    }
    std::vector<TimePoint> merged;
    merged.reserve(x.intervals() + y.intervals());
    std::set_union(x.breakpoints().begin(), x.breakpoints().end(), y.breakpoints().begin(),
                   y.breakpoints().end(), std::back_inserter(merged));
    std::vector<double> v(merged.size() * d);
    std::size_t ix = 0, iy = 0;
    for (std::size_t k = 0; k < merged.size(); ++k) {
        while (ix + 1 < x.intervals() && x.breakpoints()[ix + 1] <= merged[k]) ++ix;
        while (iy + 1 < y.intervals() && y.breakpoints()[iy + 1] <= merged[k]) ++iy;
        for (std::size_t c = 0; c < d; ++c)
            v[k * d + c] = a * x.values()[ix * d + c] + b * y.values()[iy * d + c];
    }
    return PiecewiseConstantPath(d, std::move(merged), std::move(v));
}

PiecewiseConstantPath step_indicator(std::int64_t i, std::int64_t n, std::int64_t coord,
                                     std::int64_t dim) {
    if (n < 1 || i < 1 || i > n) throw DomainError("step_indicator: index i out of range");
    if (dim < 1 || coord < 1 || coord > dim)
        throw DomainError("step_indicator: coordinate out of range");
    const auto d = static_cast<std::size_t>(dim);
    std::vector<TimePoint> bps{TimePoint(0, 1), TimePoint(i, n)};
    std::vector<double> v(2 * d, 0.0);
    v[d + static_cast<std::size_t>(coord - 1)] = 1.0;
    return PiecewiseConstantPath(d, std::move(bps), std::move(v));
}

bool paths_equal(const PiecewiseConstantPath& x, const PiecewiseConstantPath& y, double tol) {
    if (x.dim() != y.dim()) return false;
    const auto diff = lin_comb(1.0, x, -1.0, y);
    return diff.sup_norm() <= tol;
}

} // namespace steinlab
