#include "steinlab/graph.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "steinlab/errors.hpp"

namespace steinlab {

namespace {

double choose2(double m) { return m * (m - 1.0) / 2.0; }
double choose3(double m) { return m * (m - 1.0) * (m - 2.0) / 6.0; }

double n4(std::int64_t n) {
    const double d = static_cast<double>(n);
    return d * d * d * d;
}

} // namespace

GraphModel::GraphModel(std::int64_t n, double p) : n_(n), p_(p) {
    if (n_ < 3) throw DomainError("graph model needs n >= 3");
    if (!(p_ > 0.0 && p_ < 1.0)) throw DomainError("graph model needs 0 < p < 1");
}

GraphModel GraphModel::from_json(const nlohmann::json& j) {
    try {
        return GraphModel(j.at("n").get<std::int64_t>(), j.at("p").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed graph model JSON: ") + e.what());
    }
}

nlohmann::json GraphModel::to_json() const { return {{"n", n_}, {"p", p_}}; }

std::size_t edge_index(std::int64_t n, std::int64_t i, std::int64_t j) {
    if (i == j || i < 0 || j < 0 || i >= n || j >= n) throw DomainError("edge index out of range");
    if (i > j) std::swap(i, j);
    // Row i of the strict upper triangle starts after i*n - i(i+1)/2 entries.
    return static_cast<std::size_t>(i * n - i * (i + 1) / 2 + (j - i - 1));
}

bool GraphRealization::edge(std::int64_t i, std::int64_t j) const {
    return edges[edge_index(n, i, j)] != 0;
}

std::pair<double, double> moments_tv(const GraphModel& model, const TimePoint& t) {
    const double m = static_cast<double>(t.floor_mul(model.n()));
    const double nn = static_cast<double>(model.n());
    const double p = model.p();
    return {(m - 2.0) / (nn * nn) * choose2(m) * p, 3.0 / (nn * nn) * choose3(m) * p * p};
}

Eigen::Matrix2d cov_tv(const GraphModel& model, const TimePoint& t) {
    const double m = static_cast<double>(t.floor_mul(model.n()));
    const double p = model.p();
    const double f = 3.0 * (m - 2.0) * choose3(m) * p * (1.0 - p) / n4(model.n());
    Eigen::Matrix2d c;
    c << 1.0, 2.0 * p, 2.0 * p, 4.0 * p * p;
    return f * c;
}

Eigen::Matrix2d exact_cov_tv(const GraphModel& model, const TimePoint& t) {
    const double m = static_cast<double>(t.floor_mul(model.n()));
    const double p = model.p();
    Eigen::Matrix2d c = cov_tv(model, t);
    // Two-star pairs sharing both edges contribute p^2(1-p^2) rather than the 4p^3(1-p) share
    // absorbed by the rank-one form; the remainder is C(m,3) * 3 p^2 (1-p)^2.
    c(1, 1) += 3.0 * choose3(m) * p * p * (1.0 - p) * (1.0 - p) / n4(model.n());
    return c;
}

PiecewiseConstantPath graph_path(const GraphModel& model, const std::vector<std::uint8_t>& edges) {
    const std::int64_t n = model.n();
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    const double p = model.p();
    std::vector<double> v(static_cast<std::size_t>(n + 1) * 2, 0.0);
    std::vector<std::int64_t> deg(static_cast<std::size_t>(n), 0);
    std::int64_t e_count = 0, stars = 0;
    for (std::int64_t m = 1; m <= n; ++m) {
        const std::int64_t w = m - 1;  // newly added vertex
        std::int64_t d = 0;
        for (std::int64_t i = 0; i < w; ++i) {
            if (!edges[edge_index(n, i, w)]) continue;
            stars += deg[static_cast<std::size_t>(i)];
            ++deg[static_cast<std::size_t>(i)];
            ++d;
        }
        stars += d * (d - 1) / 2;
        deg[static_cast<std::size_t>(w)] = d;
        e_count += d;
        const double md = static_cast<double>(m);
        const double T = (md - 2.0) / nn * static_cast<double>(e_count);
        const double V = static_cast<double>(stars) / nn;
        const double ET = (md - 2.0) / nn * choose2(md) * p;
        const double EV = 3.0 / nn * choose3(md) * p * p;
        v[static_cast<std::size_t>(m) * 2] = T - ET;
        v[static_cast<std::size_t>(m) * 2 + 1] = V - EV;
    }
    return PiecewiseConstantPath::on_uniform_grid(2, n, std::move(v));
}

GraphRealization sample_graph(const GraphModel& model, RngStream& rng) {
    GraphRealization r;
    r.n = model.n();
    const auto count = static_cast<std::size_t>(r.n * (r.n - 1) / 2);
    r.edges.resize(count);
    for (auto& e : r.edges) e = rng.bernoulli(model.p()) ? 1 : 0;
    r.path = graph_path(model, r.edges);
    return r;
}

GraphRealization resample_edge(const GraphModel& model, const GraphRealization& r, std::int64_t i,
                               std::int64_t j, bool new_value) {
    const std::int64_t n = model.n();
    if (i > j) std::swap(i, j);
    GraphRealization out = r;
    const std::size_t idx = edge_index(n, i, j);
    const double delta = static_cast<double>(r.edges[idx]) - (new_value ? 1.0 : 0.0);  // I - I'
    out.edges[idx] = new_value ? 1 : 0;
    if (delta == 0.0) return out;
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    // Y - Y' on interval m (first m vertices present):
    //   T: (m-2)/n^2 (I - I') [m >= j+1]
    //   V: 1/n^2 (I - I') sum_{k != i,j} (I_jk + I_ik) [m >= max(j,k)+1]
    std::vector<double> diff(static_cast<std::size_t>(n + 1) * 2, 0.0);
    std::vector<double> star_at(static_cast<std::size_t>(n + 1), 0.0);
    for (std::int64_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const double c = static_cast<double>(r.edge(j, k)) + static_cast<double>(r.edge(i, k));
        star_at[static_cast<std::size_t>(std::max(j, k) + 1)] += c;
    }
    double cum = 0.0;
    for (std::int64_t m = 0; m <= n; ++m) {
        cum += star_at[static_cast<std::size_t>(m)];
        if (m >= j + 1) {
            diff[static_cast<std::size_t>(m) * 2] = (static_cast<double>(m) - 2.0) / nn * delta;
            diff[static_cast<std::size_t>(m) * 2 + 1] = cum / nn * delta;
        }
    }
    std::vector<double> v = r.path.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= diff[k];
    out.path = PiecewiseConstantPath(2, r.path.shared_breakpoints(), std::move(v));
    return out;
}

GraphPair sample_pair(const GraphModel& model, RngStream& rng) {
    GraphPair gp;
    gp.y = sample_graph(model, rng);
    const auto n = static_cast<std::uint64_t>(model.n());
    const auto a = static_cast<std::int64_t>(rng.below(n));
    auto b = static_cast<std::int64_t>(rng.below(n - 1));
    if (b >= a) ++b;
    gp.i = std::min(a, b);
    gp.j = std::max(a, b);
    gp.new_value = rng.bernoulli(model.p());
    gp.y_prime = resample_edge(model, gp.y, gp.i, gp.j, gp.new_value);
    return gp;
}

Eigen::Matrix2d lambda(const GraphModel& model) {
    const double n = static_cast<double>(model.n());
    Eigen::Matrix2d l;
    l << 2.0, 2.0 * model.p(), 0.0, 1.0;
    return n * (n - 1.0) / 8.0 * l;
}

double regression_residual(const GraphModel& model, const GraphRealization& r,
                           const CylinderFunctional& f) {
    const std::int64_t n = model.n();
    const double p = model.p();
    const Eigen::MatrixXd lam = lambda(model);
    double expectation = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j)
            for (int nv = 0; nv <= 1; ++nv) {
                const double w = nv ? p : 1.0 - p;
                const auto yp = resample_edge(model, r, i, j, nv == 1);
                const auto d = lin_comb(1.0, r.path, -1.0, yp.path).times_matrix(lam);
                expectation += w * f.dderiv(r.path, d);
            }
    expectation /= choose2(static_cast<double>(n));
    return std::abs(f.dderiv(r.path, r.path) - 2.0 * expectation);
}

// --- pre-limit covariance -------------------------------------------------------

double PrelimitCovariance::d1d1(const TimePoint& t, const TimePoint& u) const {
    const std::int64_t n = model_.n();
    const double T = static_cast<double>(t.floor_mul(n)), U = static_cast<double>(u.floor_mul(n));
    const double m = static_cast<double>(min(t, u).floor_mul(n));
    const double p = model_.p();
    return (T - 2.0) * (U - 2.0) * m * (m - 1.0) * p * (1.0 - p) / (2.0 * n4(n));
}

double PrelimitCovariance::d1d2(const TimePoint& t, const TimePoint& u) const {
    const std::int64_t n = model_.n();
    const double T = static_cast<double>(t.floor_mul(n)), U = static_cast<double>(u.floor_mul(n));
    const double m = static_cast<double>(min(t, u).floor_mul(n));
    const double p = model_.p();
    return (T - 2.0) * (U - 2.0) * m * (m - 1.0) * p * p * (1.0 - p) / n4(n);
}

double PrelimitCovariance::d2d2(const TimePoint& t, const TimePoint& u) const {
    const std::int64_t n = model_.n();
    const double T = static_cast<double>(t.floor_mul(n)), U = static_cast<double>(u.floor_mul(n));
    const double m = static_cast<double>(min(t, u).floor_mul(n));
    const double p = model_.p();
    const double N4 = n4(n), N5 = N4 * static_cast<double>(n);
    return m * (m - 1.0) *
           ((T - 2.0) * (U - 2.0) * (1.0 / N5 + 2.0 * p * p * p * (1.0 - p) / N4) +
            (m - 2.0) * p * p * (1.0 - p) * (1.0 - p) / (2.0 * N4));
}

Eigen::Matrix2d PrelimitCovariance::block(const TimePoint& t, const TimePoint& u) const {
    Eigen::Matrix2d b;
    b << d1d1(t, u), d1d2(t, u), d1d2(u, t), d2d2(t, u);
    return b;
}

LimitCoefficients limit_coefficients(double p) {
    const double q = 1.0 - p;
    const double r = std::sqrt(1.0 + 4.0 * p * p);
    return {std::sqrt(p * q) / std::sqrt(2.0 + 8.0 * p * p), p * std::sqrt(2.0 * p * q) / r,
            2.0 * p * p * std::sqrt(2.0 * p * q) / r};
}

namespace {

// Evaluation times of the driving motions at floor(nt) = T.
double pair_time(double T) { return T * (T - 1.0); }
double triple_time(double T) { return T * (T - 1.0) * (T - 2.0); }

struct BrownianSide {
    double T, U, a_min, b_min, n2, n5half;
};

BrownianSide brownian_side(const GraphModel& model, const TimePoint& t, const TimePoint& u) {
    const std::int64_t n = model.n();
    const double T = static_cast<double>(t.floor_mul(n)), U = static_cast<double>(u.floor_mul(n));
    const double nd = static_cast<double>(n);
    return {T, U, std::min(pair_time(T), pair_time(U)), std::min(triple_time(T), triple_time(U)),
            nd * nd, std::pow(nd, 2.5)};
}

} // namespace

double PrelimitCovariance::brownian_d1d1(const TimePoint& t, const TimePoint& u) const {
    const auto c = limit_coefficients(model_.p());
    const auto s = brownian_side(model_, t, u);
    const double ft = (s.T - 2.0) / s.n2, fu = (s.U - 2.0) / s.n2;
    return ft * fu * (c.alpha * c.alpha + c.beta * c.beta) * s.a_min;
}

double PrelimitCovariance::brownian_d1d2(const TimePoint& t, const TimePoint& u) const {
    const auto c = limit_coefficients(model_.p());
    const auto s = brownian_side(model_, t, u);
    const double ft = (s.T - 2.0) / s.n2, fu = (s.U - 2.0) / s.n2;
    return ft * fu * (c.alpha * c.beta + c.beta * c.gamma) * s.a_min;
}

double PrelimitCovariance::brownian_d2d2(const TimePoint& t, const TimePoint& u) const {
    const double p = model_.p();
    const auto c = limit_coefficients(p);
    const auto s = brownian_side(model_, t, u);
    const double ft = (s.T - 2.0) / s.n2, fu = (s.U - 2.0) / s.n2;
    const double gt = (s.T - 2.0) / s.n5half, gu = (s.U - 2.0) / s.n5half;
    const double kappa = p * (1.0 - p) / (std::sqrt(2.0) * s.n2);
    return ft * fu * (c.beta * c.beta + c.gamma * c.gamma) * s.a_min + gt * gu * s.a_min +
           kappa * kappa * s.b_min;
}

Eigen::MatrixXd PrelimitCovariance::grid_matrix(const std::vector<TimePoint>& grid) const {
    const auto m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd c(2 * m, 2 * m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            c.block<2, 2>(2 * a, 2 * b) = block(grid[static_cast<std::size_t>(a)], grid[static_cast<std::size_t>(b)]);
    return c;
}

PrelimitCovariance prelimit_cov(const GraphModel& model) { return PrelimitCovariance(model); }

// --- samplers -------------------------------------------------------------------

PiecewiseConstantPath sample_dn(const GraphModel& model, RngStream& rng) {
    const std::int64_t n = model.n();
    const double p = model.p();
    const auto c = limit_coefficients(p);
    const double nd = static_cast<double>(n);
    const double n2 = nd * nd, n5half = std::pow(nd, 2.5);
    const double kappa = p * (1.0 - p) / (std::sqrt(2.0) * n2);
    double b1 = 0, b2 = 0, b3 = 0, b4 = 0, prev_a = 0, prev_b = 0;
    std::vector<double> v(static_cast<std::size_t>(n + 1) * 2, 0.0);
    for (std::int64_t m = 2; m <= n; ++m) {
        const double T = static_cast<double>(m);
        const double a = pair_time(T), b = triple_time(T);
        const double sa = std::sqrt(a - prev_a);
        b1 += sa * rng.normal();
        b2 += sa * rng.normal();
        b3 += sa * rng.normal();
        if (b > prev_b) b4 += std::sqrt(b - prev_b) * rng.normal();
        prev_a = a;
        prev_b = b;
        const double f = (T - 2.0) / n2;
        v[static_cast<std::size_t>(m) * 2] = f * (c.alpha * b1 + c.beta * b2);
        v[static_cast<std::size_t>(m) * 2 + 1] =
            f * (c.beta * b1 + c.gamma * b2) + (T - 2.0) / n5half * b3 + kappa * b4;
    }
    return PiecewiseConstantPath::on_uniform_grid(2, n, std::move(v));
}

DirectGaussianOracle::DirectGaussianOracle(const GraphModel& model) : model_(model) {
    const std::int64_t n = model.n();
    if (n > 6) throw UnsupportedError("direct Gaussian oracle is limited to n <= 6");
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            if (i != j) pairs_.push_back({i, j});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            for (std::int64_t k = 0; k < n; ++k)
                if (i != j && j != k && i != k) triples_.push_back({i, j, k});
    const auto P = static_cast<Eigen::Index>(pairs_.size());
    const auto R = static_cast<Eigen::Index>(triples_.size());
    const Eigen::Index total = 2 * P + R;
    const double p = model.p(), q = 1.0 - p;
    const double N4 = n4(n), N5 = N4 * static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(total, total);
    // Layout: [Z1 pairs | Z21 pairs | Z22 triples].
    for (Eigen::Index a = 0; a < P; ++a) {
        cov(a, a) = p * q / (2.0 * N4);
        cov(P + a, P + a) = 1.0 / N5;
        cov(a, P + a) = cov(P + a, a) = p * p * q / (4.0 * N4);
    }
    auto pair_pos = [&](std::int64_t i, std::int64_t j) {
        return static_cast<Eigen::Index>(i * (n - 1) + (j < i ? j : j - 1));
    };
    for (Eigen::Index r = 0; r < R; ++r) {
        const auto& tr = triples_[static_cast<std::size_t>(r)];
        const Eigen::Index x = 2 * P + r;
        const Eigen::Index pp = pair_pos(tr[0], tr[1]);
        cov(x, pp) = cov(pp, x) = 3.0 * p * p * q / (4.0 * N4);
        cov(x, P + pp) = cov(P + pp, x) = p * p * p * q / (2.0 * N4);
        for (Eigen::Index r2 = 0; r2 < R; ++r2) {
            const auto& t2 = triples_[static_cast<std::size_t>(r2)];
            if (tr[0] != t2[0] || tr[1] != t2[1]) continue;
            cov(x, 2 * P + r2) = tr[2] == t2[2] ? p * p * (1.0 - p * p) / (2.0 * N4) : p * p * p * q / N4;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd lam = es.eigenvalues();
    min_eigenvalue_ = lam.minCoeff();
    if (min_eigenvalue_ < -1e-10 * lam.cwiseAbs().maxCoeff())
        throw UnsupportedError("the pair/triple covariance table is not positive semidefinite at n=" +
                               std::to_string(n) + ", p=" + std::to_string(p) +
                               " (min eigenvalue " + std::to_string(min_eigenvalue_) + ")");
    root_ = es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

PiecewiseConstantPath DirectGaussianOracle::sample(RngStream& rng) const {
    const std::int64_t n = model_.n();
    const Eigen::Index total = root_.rows();
    Eigen::VectorXd g(total);
    for (Eigen::Index k = 0; k < total; ++k) g[k] = rng.normal();
    const Eigen::VectorXd z = root_ * g;
    const auto P = static_cast<Eigen::Index>(pairs_.size());
    std::vector<double> v(static_cast<std::size_t>(n + 1) * 2, 0.0);
    for (std::int64_t m = 0; m <= n; ++m) {
        double s1 = 0.0, s21 = 0.0, s22 = 0.0;
        for (std::size_t a = 0; a < pairs_.size(); ++a)
            if (pairs_[a][0] < m && pairs_[a][1] < m) {
                s1 += z[static_cast<Eigen::Index>(a)];
                s21 += z[P + static_cast<Eigen::Index>(a)];
            }
        for (std::size_t r = 0; r < triples_.size(); ++r)
            if (triples_[r][0] < m && triples_[r][1] < m && triples_[r][2] < m)
                s22 += z[2 * P + static_cast<Eigen::Index>(r)];
        const double f = static_cast<double>(m) - 2.0;
        v[static_cast<std::size_t>(m) * 2] = f * s1;
        v[static_cast<std::size_t>(m) * 2 + 1] = f * s21 + s22;
    }
    return PiecewiseConstantPath::on_uniform_grid(2, n, std::move(v));
}

PiecewiseConstantPath sample_z(double p, const std::vector<TimePoint>& grid_in, RngStream& rng) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("sample_z needs 0 < p < 1");
    std::vector<TimePoint> grid = grid_in;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty() || !(grid.front() == TimePoint(0, 1))) grid.insert(grid.begin(), TimePoint(0, 1));
    const auto c = limit_coefficients(p);
    std::vector<double> v(grid.size() * 2, 0.0);
    double b1 = 0.0, b2 = 0.0, prev = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double t = grid[k].to_double();
        const double s = t * t;
        const double sd = std::sqrt(s - prev);
        b1 += sd * rng.normal();
        b2 += sd * rng.normal();
        prev = s;
        v[2 * k] = t * (c.alpha * b1 + c.beta * b2);
        v[2 * k + 1] = t * (c.beta * b1 + c.gamma * b2);
    }
    return PiecewiseConstantPath(2, std::move(grid), std::move(v));
}

double bound_prelimit(std::int64_t n, double gnorm) {
    if (n < 3) throw DomainError("bound needs n >= 3");
    return 12.0 * gnorm / static_cast<double>(n);
}

double bound_continuous(std::int64_t n, double gnorm) {
    if (n < 3) throw DomainError("bound needs n >= 3");
    const double nd = static_cast<double>(n);
    return gnorm * (913.0 * std::sqrt(std::log(nd)) / std::sqrt(nd) + 112.0 / std::sqrt(nd));
}

CouplingReport coupling_distance(const GraphModel& model, std::size_t samples, const SeedSpec& seed,
                                 unsigned workers) {
    const std::int64_t n = model.n();
    const double p = model.p();
    const auto c = limit_coefficients(p);
    const double nd = static_cast<double>(n);
    constexpr std::int64_t kRefine = 8;
    const std::int64_t K = kRefine * n;
    // Times of the rescaled motions B~(s) = B(n^2 s)/n, all multiples of 1/(64 n^2):
    // fine-grid squares k^2/(64 n^2) and pre-limit times T(T-1)/n^2.
    std::vector<std::int64_t> keys;
    for (std::int64_t k = 0; k <= K; ++k) keys.push_back(k * k);
    for (std::int64_t T = 0; T <= n; ++T) keys.push_back(kRefine * kRefine * T * (T - 1));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    auto key_pos = [&](std::int64_t key) {
        return static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), key) - keys.begin());
    };
    std::vector<std::size_t> fine_pos(static_cast<std::size_t>(K + 1)), pre_pos(static_cast<std::size_t>(n + 1));
    for (std::int64_t k = 0; k <= K; ++k) fine_pos[static_cast<std::size_t>(k)] = key_pos(k * k);
    for (std::int64_t T = 0; T <= n; ++T)
        pre_pos[static_cast<std::size_t>(T)] = key_pos(kRefine * kRefine * T * (T - 1));
    const double unit = 1.0 / (static_cast<double>(kRefine * kRefine) * nd * nd);
    const double n5half = std::pow(nd, 2.5);
    const double kappa = p * (1.0 - p) / (std::sqrt(2.0) * nd * nd);

    enum { kDist, kDistSq, kLimitSq, kBias, kXY, kXX, kYY, kCount };
    auto body = [&](RngStream& rng, McVector& acc) {
        std::vector<double> w1(keys.size(), 0.0), w2(keys.size(), 0.0);
        for (std::size_t k = 1; k < keys.size(); ++k) {
            const double sd = std::sqrt(static_cast<double>(keys[k] - keys[k - 1]) * unit);
            w1[k] = w1[k - 1] + sd * rng.normal();
            w2[k] = w2[k - 1] + sd * rng.normal();
        }
        // Pre-limit values per T.
        std::vector<double> zn1(static_cast<std::size_t>(n + 1), 0.0), zn2(static_cast<std::size_t>(n + 1), 0.0);
        double b3 = 0.0, b4 = 0.0, prev_a = 0.0, prev_b = 0.0;
        for (std::int64_t T = 2; T <= n; ++T) {
            const double Td = static_cast<double>(T);
            const double a = pair_time(Td), b = triple_time(Td);
            b3 += std::sqrt(a - prev_a) * rng.normal();
            if (b > prev_b) b4 += std::sqrt(b - prev_b) * rng.normal();
            prev_a = a;
            prev_b = b;
            const std::size_t pos = pre_pos[static_cast<std::size_t>(T)];
            // B(T(T-1)) = n B~(T(T-1)/n^2)
            const double f = (Td - 2.0) / nd;
            zn1[static_cast<std::size_t>(T)] = f * (c.alpha * w1[pos] + c.beta * w2[pos]);
            zn2[static_cast<std::size_t>(T)] =
                f * (c.beta * w1[pos] + c.gamma * w2[pos]) + (Td - 2.0) / n5half * b3 + kappa * b4;
        }
        double sup8 = 0.0, sup4 = 0.0, zsup = 0.0;
        for (std::int64_t k = 0; k <= K; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(K);
            const std::size_t pos = fine_pos[static_cast<std::size_t>(k)];
            const double z1 = t * (c.alpha * w1[pos] + c.beta * w2[pos]);
            const double z2 = t * (c.beta * w1[pos] + c.gamma * w2[pos]);
            const auto T = static_cast<std::size_t>(k / kRefine);
            const double d = std::hypot(zn1[T] - z1, zn2[T] - z2);
            sup8 = std::max(sup8, d);
            if (k % 2 == 0) sup4 = std::max(sup4, d);
            zsup = std::max(zsup, std::hypot(z1, z2));
        }
        const double x = zn1[static_cast<std::size_t>(n)];
        const std::size_t last = fine_pos[static_cast<std::size_t>(K)];
        const double y = c.alpha * w1[last] + c.beta * w2[last];
        acc[kDist].accumulate(sup8);
        acc[kDistSq].accumulate(sup8 * sup8);
        acc[kLimitSq].accumulate(zsup * zsup);
        acc[kBias].accumulate(sup8 - sup4);
        acc[kXY].accumulate(x * y);
        acc[kXX].accumulate(x * x);
        acc[kYY].accumulate(y * y);
    };
    const McVector acc = monte_carlo(samples, seed, workers, body, McVector(kCount));

    CouplingReport rep;
    rep.dist = acc[kDist];
    rep.dist_sq = acc[kDistSq];
    rep.limit_sq = acc[kLimitSq];
    rep.grid_bias = acc[kBias];
    const double denom = std::sqrt(acc[kXX].mean() * acc[kYY].mean());
    rep.corr_first = denom > 0.0 ? acc[kXY].mean() / denom : 0.0;
    const double ln = std::log(nd);
    rep.bound_dist = 12.0 / std::sqrt(nd) + 51.0 * std::sqrt(ln) / std::sqrt(nd);
    rep.bound_dist_sq = 121.0 / nd + 743.0 * ln / nd;
    rep.bound_limit_sq = 5.0;
    auto lower = [](const McEstimate& e) { return e.mean() - 1.96 * e.std_error(); };
    rep.pass_dist = lower(rep.dist) <= rep.bound_dist;
    rep.pass_dist_sq = lower(rep.dist_sq) <= rep.bound_dist_sq;
    rep.pass_limit_sq = lower(rep.limit_sq) <= rep.bound_limit_sq;
    return rep;
}

} // namespace steinlab
