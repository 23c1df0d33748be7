#include "steinlab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "steinlab/errors.hpp"

namespace steinlab {

namespace {

// sup |tanh''| = 4 / (3 sqrt 3), attained where tanh^2 = 1/3.
const double kTanhSecondSup = 4.0 / (3.0 * std::sqrt(3.0));

struct ProfileDerivs {
    double d0, d1, d2, d3;
};

ProfileDerivs profile_derivs(Profile p, double y) {
    switch (p) {
    case Profile::Sin:
        return {std::sin(y), std::cos(y), -std::sin(y), -std::cos(y)};
    case Profile::Cos:
        return {std::cos(y), -std::sin(y), -std::cos(y), std::sin(y)};
    case Profile::Tanh: {
        const double th = std::tanh(y);
        const double s2 = 1.0 - th * th;
        return {th, s2, -2.0 * th * s2, s2 * (6.0 * th * th - 2.0)};
    }
    }
    return {0, 0, 0, 0};
}

// {sup|psi|, sup|psi'|, sup|psi''|, sup|psi'''|}
ProfileDerivs profile_sups(Profile p) {
    if (p == Profile::Tanh) return {1.0, 1.0, kTanhSecondSup, 2.0};
    return {1.0, 1.0, 1.0, 1.0};
}

} // namespace

std::string to_string(NormClass c) {
    switch (c) {
    case NormClass::M0: return "M0";
    case NormClass::M1: return "M1";
    case NormClass::M2: return "M2";
    case NormClass::M: return "M";
    }
    return "M";
}

NormClass parse_norm_class(const std::string& text) {
    if (text == "M0") return NormClass::M0;
    if (text == "M1") return NormClass::M1;
    if (text == "M2") return NormClass::M2;
    if (text == "M") return NormClass::M;
    throw UsageError("unknown norm class '" + text + "' (expected M0, M1, M2 or M)");
}

// ---------------------------------------------------------------------------

CylinderFunctional::CylinderFunctional(std::size_t dim, std::vector<TimePoint> times,
                                       std::shared_ptr<const SmoothMap> base, std::string name)
    : dim_(dim), times_(std::move(times)), base_(std::move(base)), name_(std::move(name)) {
    if (dim_ == 0) throw DimensionError("functional dimension must be positive");
    if (!base_) throw DomainError("functional needs a base map");
    for (std::size_t a = 1; a < times_.size(); ++a)
        if (!(times_[a - 1] < times_[a]))
            throw DomainError("cylinder times must be strictly increasing");
    if (base_->input_size() != dim_ * times_.size())
        throw DimensionError("base map input size does not equal dim * number of times");
}

void CylinderFunctional::check_dim(const PiecewiseConstantPath& w) const {
    if (w.dim() != dim_)
        throw DimensionError("path of dimension " + std::to_string(w.dim()) +
                             " given to functional of dimension " + std::to_string(dim_));
}

Eigen::VectorXd CylinderFunctional::coordinates(const PiecewiseConstantPath& w) const {
    check_dim(w);
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim_ * times_.size()));
    for (std::size_t a = 0; a < times_.size(); ++a)
        x.segment(static_cast<Eigen::Index>(a * dim_), static_cast<Eigen::Index>(dim_)) =
            w.value(w.interval_of(times_[a]));
    return x;
}

double CylinderFunctional::eval(const PiecewiseConstantPath& w) const {
    return base_->value(coordinates(w));
}

double CylinderFunctional::dderiv(const PiecewiseConstantPath& w,
                                  const PiecewiseConstantPath& h) const {
    return base_->gradient(coordinates(w)).dot(coordinates(h));
}

double CylinderFunctional::dderiv2(const PiecewiseConstantPath& w, const PiecewiseConstantPath& h1,
                                   const PiecewiseConstantPath& h2) const {
    return coordinates(h1).dot(base_->hessian(coordinates(w)) * coordinates(h2));
}

Eigen::VectorXd CylinderFunctional::gradient_at(const PiecewiseConstantPath& w) const {
    return base_->gradient(coordinates(w));
}

Eigen::MatrixXd CylinderFunctional::hessian_at(const PiecewiseConstantPath& w) const {
    return base_->hessian(coordinates(w));
}

NormBound CylinderFunctional::norm_upper_bound(NormClass c) const {
    const auto b = base_->bounds();
    if (!b)
        throw UnsupportedError("functional '" + name_ + "' has no certified derivative bounds");
    // Every class weight (1 + |w|^j)^{-1} is at most 1, so the unweighted sums dominate all four.
    const double k = static_cast<double>(times_.size());
    NormBound nb;
    nb.norm_class = c;
    nb.value_term = b->value_sup;
    nb.gradient_term = b->gradient_sup;
    nb.hessian_term = b->hessian_sup;
    nb.lipschitz_term = k * k * b->hessian_lipschitz;
    nb.value = nb.value_term + nb.gradient_term + nb.hessian_term + nb.lipschitz_term;
    return nb;
}

// --- RidgeMap ---------------------------------------------------------------

RidgeMap::RidgeMap(Profile profile, std::size_t dim, std::size_t arity, std::size_t coord,
                   double scale)
    : profile_(profile), dim_(dim), arity_(arity), coord_(coord), scale_(scale) {
    if (coord_ >= dim_) throw DomainError("ridge coordinate out of range");
    if (!std::isfinite(scale_)) throw DomainError("ridge scale must be finite");
}

double RidgeMap::argument(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (std::size_t a = 0; a < arity_; ++a) s += x[static_cast<Eigen::Index>(a * dim_ + coord_)];
    return scale_ * s;
}

double RidgeMap::value(const Eigen::VectorXd& x) const {
    return profile_derivs(profile_, argument(x)).d0;
}

Eigen::VectorXd RidgeMap::gradient(const Eigen::VectorXd& x) const {
    const double d1 = profile_derivs(profile_, argument(x)).d1;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_size()));
    for (std::size_t a = 0; a < arity_; ++a) g[static_cast<Eigen::Index>(a * dim_ + coord_)] = scale_ * d1;
    return g;
}

Eigen::MatrixXd RidgeMap::hessian(const Eigen::VectorXd& x) const {
    const double d2 = profile_derivs(profile_, argument(x)).d2;
    const auto m = static_cast<Eigen::Index>(input_size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t a = 0; a < arity_; ++a)
        for (std::size_t b = 0; b < arity_; ++b)
            h(static_cast<Eigen::Index>(a * dim_ + coord_), static_cast<Eigen::Index>(b * dim_ + coord_)) =
                scale_ * scale_ * d2;
    return h;
}

std::optional<DerivativeBounds> RidgeMap::bounds() const {
    const auto s = profile_sups(profile_);
    const double k = static_cast<double>(arity_);
    const double a = std::abs(scale_);
    // Each block H_ab = a^2 psi'' e e^T; its change under a shift d is a^3 |psi'''| |sum_c d_c|.
    return DerivativeBounds{s.d0, k * a * s.d1, k * k * a * a * s.d2, k * a * a * a * s.d3};
}

// --- TanhProductMap -----------------------------------------------------------

TanhProductMap::TanhProductMap(std::size_t dim, std::vector<std::size_t> coords)
    : dim_(dim), coords_(std::move(coords)) {
    for (auto c : coords_)
        if (c >= dim_) throw DomainError("tanhprod coordinate out of range");
}

double TanhProductMap::value(const Eigen::VectorXd& x) const {
    double v = 1.0;
    for (std::size_t a = 0; a < coords_.size(); ++a)
        v *= std::tanh(x[static_cast<Eigen::Index>(a * dim_ + coords_[a])]);
    return v;
}

Eigen::VectorXd TanhProductMap::gradient(const Eigen::VectorXd& x) const {
    const std::size_t k = coords_.size();
    std::vector<double> th(k), d1(k);
    for (std::size_t a = 0; a < k; ++a) {
        th[a] = std::tanh(x[static_cast<Eigen::Index>(a * dim_ + coords_[a])]);
        d1[a] = 1.0 - th[a] * th[a];
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_size()));
    for (std::size_t a = 0; a < k; ++a) {
        double v = d1[a];
        for (std::size_t b = 0; b < k; ++b)
            if (b != a) v *= th[b];
        g[static_cast<Eigen::Index>(a * dim_ + coords_[a])] = v;
    }
    return g;
}

Eigen::MatrixXd TanhProductMap::hessian(const Eigen::VectorXd& x) const {
    const std::size_t k = coords_.size();
    std::vector<double> th(k), d1(k), d2(k);
    for (std::size_t a = 0; a < k; ++a) {
        th[a] = std::tanh(x[static_cast<Eigen::Index>(a * dim_ + coords_[a])]);
        d1[a] = 1.0 - th[a] * th[a];
        d2[a] = -2.0 * th[a] * d1[a];
    }
    const auto m = static_cast<Eigen::Index>(input_size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            double v = 1.0;
            for (std::size_t c = 0; c < k; ++c) {
                if (a == b && c == a) v *= d2[c];
                else if (c == a || c == b) v *= d1[c];
                else v *= th[c];
            }
            h(static_cast<Eigen::Index>(a * dim_ + coords_[a]),
              static_cast<Eigen::Index>(b * dim_ + coords_[b])) = v;
        }
    return h;
}

std::optional<DerivativeBounds> TanhProductMap::bounds() const {
    const double k = static_cast<double>(coords_.size());
    const double c2 = kTanhSecondSup;
    // Per-block Lipschitz constants via the l1 norm of the block's gradient (unit factors):
    // diagonal blocks psi''' + (k-1) psi'' psi', off-diagonal 2 psi'' psi' + (k-2) psi'^3.
    double lip = 2.0 + (k - 1.0) * c2;
    if (k >= 2.0) lip = std::max(lip, 2.0 * c2 + (k - 2.0));
    return DerivativeBounds{1.0, k, k * c2 + k * (k - 1.0), lip};
}

// --- LinearMap ----------------------------------------------------------------

LinearMap::LinearMap(std::size_t dim, std::vector<std::size_t> coords)
    : dim_(dim), coords_(std::move(coords)) {
    for (auto c : coords_)
        if (c >= dim_) throw DomainError("lin coordinate out of range");
}

double LinearMap::value(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (std::size_t a = 0; a < coords_.size(); ++a) v += x[static_cast<Eigen::Index>(a * dim_ + coords_[a])];
    return v;
}

Eigen::VectorXd LinearMap::gradient(const Eigen::VectorXd&) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_size()));
    for (std::size_t a = 0; a < coords_.size(); ++a) g[static_cast<Eigen::Index>(a * dim_ + coords_[a])] = 1.0;
    return g;
}

Eigen::MatrixXd LinearMap::hessian(const Eigen::VectorXd&) const {
    const auto m = static_cast<Eigen::Index>(input_size());
    return Eigen::MatrixXd::Zero(m, m);
}

// --- ProductMap ---------------------------------------------------------------

Eigen::VectorXd ProductMap::gradient(const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(dim_);
    Eigen::VectorXd g(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double v = 1.0;
        for (Eigen::Index k = 0; k < m; ++k)
            if (k != i) v *= x[k];
        g[i] = v;
    }
    return g;
}

Eigen::MatrixXd ProductMap::hessian(const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j) continue;
            double v = 1.0;
            for (Eigen::Index k = 0; k < m; ++k)
                if (k != i && k != j) v *= x[k];
            h(i, j) = v;
        }
    return h;
}

// --- parser -------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::size_t parse_coord(const std::string& text, std::size_t dim) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size() || v < 1 || static_cast<std::size_t>(v) > dim)
            throw UsageError("");
        return static_cast<std::size_t>(v - 1);
    } catch (const std::exception&) {
        throw UsageError("coordinate '" + text + "' must be an integer in 1.." + std::to_string(dim));
    }
}

double parse_real(const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw UsageError("");
        return v;
    } catch (const std::exception&) {
        throw UsageError("'" + text + "' is not a finite number");
    }
}

std::vector<TimePoint> parse_times(const std::vector<std::string>& items) {
    std::vector<TimePoint> out;
    for (const auto& it : items) {
        try {
            out.push_back(TimePoint::parse(it));
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
    return out;
}

} // namespace

CylinderFunctional parse_functional(const std::string& spec_in, std::size_t dim) {
    const std::string spec = trim(spec_in);
    const auto colon = spec.find(':');
    const std::string kind = trim(spec.substr(0, colon));
    std::map<std::string, std::vector<std::string>> args;
    if (colon != std::string::npos) {
        std::string current;
        std::stringstream ss(spec.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            const auto eq = tok.find('=');
            if (eq != std::string::npos) {
                current = trim(tok.substr(0, eq));
                if (args.count(current)) throw UsageError("duplicate key '" + current + "' in functional spec");
                args[current].push_back(trim(tok.substr(eq + 1)));
            } else {
                if (current.empty()) throw UsageError("functional spec value '" + tok + "' has no key");
                args[current].push_back(tok);
            }
        }
    }
    auto take = [&](const std::string& key) -> std::vector<std::string> {
        auto it = args.find(key);
        if (it == args.end()) return {};
        auto v = it->second;
        args.erase(it);
        return v;
    };
    auto finish = [&]() {
        if (!args.empty())
            throw UsageError("unknown key '" + args.begin()->first + "' in functional spec '" + spec + "'");
    };

    if (kind == "sin" || kind == "cos" || kind == "tanh") {
        const auto coord_items = take("coord");
        if (coord_items.size() != 1) throw UsageError(kind + " needs exactly one coord=");
        const auto c = parse_coord(coord_items[0], dim);
        auto times = parse_times(take("t"));
        if (times.empty()) throw UsageError(kind + " needs at least one time t=");
        std::sort(times.begin(), times.end());
        if (std::adjacent_find(times.begin(), times.end()) != times.end())
            throw UsageError("repeated time in functional spec");
        double scale = 1.0;
        const auto sc = take("scale");
        if (sc.size() > 1) throw UsageError("scale takes one value");
        if (sc.size() == 1) scale = parse_real(sc[0]);
        finish();
        const Profile p = kind == "sin" ? Profile::Sin : kind == "cos" ? Profile::Cos : Profile::Tanh;
        auto base = std::make_shared<RidgeMap>(p, dim, times.size(), c, scale);
        return CylinderFunctional(dim, std::move(times), std::move(base), spec);
    }
    if (kind == "tanhprod" || kind == "lin") {
        const auto coord_items = take("coords");
        auto times = parse_times(take("t"));
        finish();
        if (coord_items.empty() || coord_items.size() != times.size())
            throw UsageError(kind + " needs one coordinate per time (coords=..., t=...)");
        std::vector<std::size_t> coords;
        for (const auto& c : coord_items) coords.push_back(parse_coord(c, dim));
        std::shared_ptr<const SmoothMap> base;
        if (kind == "tanhprod") base = std::make_shared<TanhProductMap>(dim, coords);
        else base = std::make_shared<LinearMap>(dim, coords);
        try {
            return CylinderFunctional(dim, std::move(times), std::move(base), spec);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
    if (kind == "prod") {
        const auto times = parse_times(take("t"));
        finish();
        if (times.size() != 1) throw UsageError("prod needs exactly one time t=");
        return CylinderFunctional(dim, times, std::make_shared<ProductMap>(dim), spec);
    }
    if (kind == "const") {
        const auto v = take("value");
        if (v.size() != 1) throw UsageError("const needs value=");
        finish();
        return CylinderFunctional(dim, {}, std::make_shared<ConstantMap>(0, parse_real(v[0])), spec);
    }
    throw UsageError("unknown functional kind '" + kind +
                     "' (expected sin, cos, tanh, tanhprod, lin, prod or const)");
}

} // namespace steinlab
