#include "steinlab/combinatorial.hpp"

#include <algorithm>
#include <cmath>

#include "steinlab/errors.hpp"

namespace steinlab {

namespace {

const double kSqrt2OverPi = std::sqrt(2.0 / M_PI);

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

std::string dist_name(EntryDist d) {
    switch (d) {
    case EntryDist::Constant: return "constant";
    case EntryDist::Gaussian: return "gaussian";
    case EntryDist::RademacherShifted: return "rademacher-shifted";
    case EntryDist::TwoPoint: return "two-point";
    }
    return "constant";
}

} // namespace

// --- EntrySpec -------------------------------------------------------------

double EntrySpec::mean() const {
    switch (dist) {
    case EntryDist::Constant: return a;
    case EntryDist::Gaussian: return a;
    case EntryDist::RademacherShifted: return a;
    case EntryDist::TwoPoint: return q * a + (1.0 - q) * b;
    }
    return 0.0;
}

double EntrySpec::variance() const {
    switch (dist) {
    case EntryDist::Constant: return 0.0;
    case EntryDist::Gaussian: return b * b;
    case EntryDist::RademacherShifted: return b * b;
    case EntryDist::TwoPoint: return q * (1.0 - q) * (a - b) * (a - b);
    }
    return 0.0;
}

double EntrySpec::abs_moment(int k) const {
    if (k < 1 || k > 3) throw DomainError("abs_moment supports k = 1, 2, 3");
    switch (dist) {
    case EntryDist::Constant: return ipow(std::abs(a), k);
    case EntryDist::Gaussian: {
        if (b == 0.0) return ipow(std::abs(a), k);
        const double sd = std::abs(b);
        const double r = a / sd;
        const double e = std::exp(-0.5 * r * r);
        const double erf_r = std::erf(r / std::sqrt(2.0));
        if (k == 1) return sd * kSqrt2OverPi * e + a * erf_r;
        if (k == 2) return a * a + sd * sd;
        return a * (a * a + 3.0 * sd * sd) * erf_r + sd * sd * sd * kSqrt2OverPi * (2.0 + r * r) * e;
    }
    case EntryDist::RademacherShifted:
        return 0.5 * (ipow(std::abs(a + b), k) + ipow(std::abs(a - b), k));
    case EntryDist::TwoPoint:
        return q * ipow(std::abs(a), k) + (1.0 - q) * ipow(std::abs(b), k);
    }
    return 0.0;
}

double EntrySpec::sample(RngStream& rng) const {
    switch (dist) {
    case EntryDist::Constant: return a;
    case EntryDist::Gaussian: return a + b * rng.normal();
    case EntryDist::RademacherShifted: return rng.bernoulli(0.5) ? a + b : a - b;
    case EntryDist::TwoPoint: return rng.bernoulli(q) ? a : b;
    }
    return 0.0;
}

nlohmann::json EntrySpec::to_json() const {
    nlohmann::json j;
    j["dist"] = dist_name(dist);
    switch (dist) {
    case EntryDist::Constant: j["value"] = a; break;
    case EntryDist::Gaussian: j["mean"] = a; j["sd"] = b; break;
    case EntryDist::RademacherShifted: j["mean"] = a; j["scale"] = b; break;
    case EntryDist::TwoPoint: j["x1"] = a; j["x2"] = b; j["p"] = q; break;
    }
    return j;
}

// --- ArrayModel --------------------------------------------------------------

ArrayModel::ArrayModel(std::size_t n, std::vector<EntrySpec> entries)
    : n_(n), entries_(std::move(entries)) {
    if (n_ < 2) throw DomainError("array model needs n >= 2");
    if (entries_.size() != n_ * n_) throw DimensionError("array model needs n*n entries");
    for (const auto& e : entries_) {
        if (!std::isfinite(e.a) || !std::isfinite(e.b)) throw DataError("entry parameters must be finite");
        if (e.dist == EntryDist::Gaussian && e.b < 0.0) throw DomainError("Gaussian sd must be >= 0");
        if (e.dist == EntryDist::TwoPoint && !(e.q >= 0.0 && e.q <= 1.0))
            throw DomainError("two-point probability must lie in [0,1]");
    }
    const Eigen::MatrixXd c = mean_matrix();
    const double tol = 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff());
    const double row_dev = (c.rowwise().sum() / static_cast<double>(n_)).cwiseAbs().maxCoeff();
    const double col_dev = (c.colwise().sum() / static_cast<double>(n_)).cwiseAbs().maxCoeff();
    if (row_dev > tol || col_dev > tol)
        throw DomainError("entry means must have zero row and column averages (use \"center\": true)");
    for (const auto& e : entries_) {
        // Jensen: E|X|^3 >= (E X^2)^{3/2}.
        const double m2 = e.abs_moment(2);
        if (e.abs_moment(3) < std::pow(m2, 1.5) * (1.0 - 1e-9) - 1e-9)
            throw DataError("third absolute moment inconsistent with the second moment");
    }
    s_ = std::sqrt(s_n_squared(*this));
}

ArrayModel ArrayModel::iid_gaussian(std::size_t n, double sigma) {
    return ArrayModel(n, std::vector<EntrySpec>(n * n, EntrySpec::gaussian(0.0, sigma)));
}

ArrayModel ArrayModel::deterministic(const Eigen::MatrixXd& x) {
    if (x.rows() != x.cols()) throw DimensionError("deterministic array must be square");
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<EntrySpec> e;
    e.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            e.push_back(EntrySpec::constant(x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    return ArrayModel(n, std::move(e));
}

namespace {

Eigen::MatrixXd read_matrix(const nlohmann::json& j, std::size_t n) {
    if (!j.is_array() || j.size() != n) throw DataError("matrix must have n rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n) throw DataError("matrix must have n columns");
        for (std::size_t k = 0; k < n; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return m;
}

void shift_mean(EntrySpec& e, double delta) {
    e.a += delta;
    if (e.dist == EntryDist::TwoPoint) e.b += delta;
}

} // namespace

ArrayModel ArrayModel::from_json(const nlohmann::json& j) {
    try {
        const auto n = j.at("n").get<std::size_t>();
        if (n < 2) throw DomainError("array model needs n >= 2");
        const bool center = j.value("center", false);
        std::vector<EntrySpec> entries(n * n, EntrySpec::constant(0.0));
        if (j.contains("preset")) {
            const auto preset = j.at("preset").get<std::string>();
            if (preset == "iid-gaussian") {
                const double sigma = j.value("sigma", 1.0);
                std::fill(entries.begin(), entries.end(), EntrySpec::gaussian(0.0, sigma));
            } else if (preset == "deterministic") {
                const Eigen::MatrixXd m = read_matrix(j.at("matrix"), n);
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < n; ++c)
                        entries[r * n + c] = EntrySpec::constant(m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            } else {
                throw DataError("unknown array preset '" + preset + "'");
            }
        } else {
            for (const auto& e : j.at("entries")) {
                const auto i = e.at("i").get<std::size_t>();
                const auto k = e.at("j").get<std::size_t>();
                if (i < 1 || i > n || k < 1 || k > n) throw DataError("entry index out of range");
                const auto dist = e.at("dist").get<std::string>();
                EntrySpec s;
                if (dist == "constant") s = EntrySpec::constant(e.at("value").get<double>());
                else if (dist == "gaussian")
                    s = EntrySpec::gaussian(e.value("mean", 0.0), e.at("sd").get<double>());
                else if (dist == "rademacher-shifted")
                    s = EntrySpec::rademacher_shifted(e.value("mean", 0.0), e.at("scale").get<double>());
                else if (dist == "two-point")
                    s = EntrySpec::two_point(e.at("x1").get<double>(), e.at("x2").get<double>(),
                                             e.at("p").get<double>());
                else throw DataError("unknown entry distribution '" + dist + "'");
                entries[(i - 1) * n + (k - 1)] = s;
            }
        }
        if (center) {
            Eigen::MatrixXd c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < n; ++k)
                    c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = entries[r * n + k].mean();
            const Eigen::MatrixXd cc = double_center(c);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < n; ++k)
                    shift_mean(entries[r * n + k],
                               cc(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) -
                                   c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
        }
        return ArrayModel(n, std::move(entries));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed array model JSON: ") + e.what());
    }
}

nlohmann::json ArrayModel::to_json() const {
    nlohmann::json j;
    j["n"] = n_;
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t k = 0; k < n_; ++k) {
            auto e = entry(i, k).to_json();
            e["i"] = i + 1;
            e["j"] = k + 1;
            arr.push_back(e);
        }
    j["entries"] = arr;
    return j;
}

Eigen::MatrixXd ArrayModel::mean_matrix() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = entries_[static_cast<std::size_t>(i * n + k)].mean();
    return m;
}

Eigen::MatrixXd ArrayModel::variance_matrix() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = entries_[static_cast<std::size_t>(i * n + k)].variance();
    return m;
}

Eigen::MatrixXd ArrayModel::abs_moment_matrix(int order) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k)
            m(i, k) = entries_[static_cast<std::size_t>(i * n + k)].abs_moment(order);
    return m;
}

MomentTables ArrayModel::moments() const {
    return {abs_moment_matrix(1), abs_moment_matrix(2), abs_moment_matrix(3), mean_matrix(),
            variance_matrix(), s_};
}

bool ArrayModel::is_deterministic() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const EntrySpec& e) { return e.variance() == 0.0; });
}

Eigen::MatrixXd ArrayModel::sample_array(RngStream& rng) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd x(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) x(i, k) = entries_[static_cast<std::size_t>(i * n + k)].sample(rng);
    return x;
}

Eigen::MatrixXd double_center(const Eigen::MatrixXd& c) {
    const Eigen::VectorXd row = c.rowwise().mean();
    const Eigen::RowVectorXd col = c.colwise().mean();
    const double grand = c.mean();
    Eigen::MatrixXd out = c;
    out.colwise() -= row;
    out.rowwise() -= col;
    out.array() += grand;
    return out;
}

double s_n_squared(const ArrayModel& model) {
    const double n = static_cast<double>(model.n());
    const double s2 = model.variance_matrix().sum() / n + model.mean_matrix().squaredNorm() / (n - 1.0);
    if (!(s2 > 0.0)) throw DegenerateModelError("s_n^2 = 0: the permutation statistic is constant");
    return s2;
}

// --- process ------------------------------------------------------------------

PiecewiseConstantPath combinatorial_path(const Eigen::MatrixXd& x, const std::vector<std::size_t>& pi,
                                         double s) {
    const std::size_t n = pi.size();
    std::vector<double> v(n + 1, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pi[i]));
        v[i + 1] = acc / s;
    }
    return PiecewiseConstantPath::on_uniform_grid(1, static_cast<std::int64_t>(n), std::move(v));
}

CombinatorialRealization sample_y(const ArrayModel& model, RngStream& rng) {
    CombinatorialRealization r;
    r.x = model.sample_array(rng);
    const std::size_t n = model.n();
    r.pi.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.pi[i] = i;
    // Fisher-Yates.
    for (std::size_t i = n - 1; i > 0; --i) std::swap(r.pi[i], r.pi[rng.below(i + 1)]);
    r.s = model.s();
    r.path = combinatorial_path(r.x, r.pi, r.s);
    return r;
}

CombinatorialRealization swap_pair(const CombinatorialRealization& r, std::size_t i, std::size_t j) {
    if (i == j || i >= r.pi.size() || j >= r.pi.size()) throw DomainError("swap_pair needs distinct valid rows");
    CombinatorialRealization out = r;
    std::swap(out.pi[i], out.pi[j]);
    out.path = combinatorial_path(out.x, out.pi, out.s);
    return out;
}

CombinatorialPair sample_pair(const ArrayModel& model, RngStream& rng) {
    CombinatorialPair p;
    p.y = sample_y(model, rng);
    const std::size_t n = model.n();
    p.i = rng.below(n);
    p.j = rng.below(n - 1);
    if (p.j >= p.i) ++p.j;
    p.y_prime = swap_pair(p.y, p.i, p.j);
    return p;
}

Eigen::MatrixXd combinatorial_lambda(std::size_t n) {
    return Eigen::MatrixXd::Constant(1, 1, (static_cast<double>(n) - 1.0) / 4.0);
}

double regression_residual(const CombinatorialRealization& r, const CylinderFunctional& f) {
    const std::size_t n = r.pi.size();
    const auto nn = static_cast<std::int64_t>(n);
    double lhs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto yp = swap_pair(r, i, j);
            lhs += f.dderiv(r.path, lin_comb(1.0, r.path, -1.0, yp.path));
        }
    lhs /= static_cast<double>(n * (n - 1));
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double xv = r.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r.pi[j]));
            cross += f.dderiv(r.path, step_indicator(static_cast<std::int64_t>(i) + 1, nn, 1, 1).scaled(xv));
        }
    const double rhs = 2.0 / (static_cast<double>(n) - 1.0) *
                       (f.dderiv(r.path, r.path) - cross / (static_cast<double>(n) * r.s));
    return std::abs(lhs - rhs);
}

// --- pre-limit ------------------------------------------------------------------

double zhat_cov(const ArrayModel& model, std::size_t i, std::size_t j) {
    const std::size_t n = model.n();
    if (i < 1 || j < 1 || i > n || j > n) throw DomainError("zhat_cov: index out of range");
    const Eigen::MatrixXd c = model.mean_matrix();
    const double nd = static_cast<double>(n);
    const auto ii = static_cast<Eigen::Index>(i - 1), jj = static_cast<Eigen::Index>(j - 1);
    if (i == j) {
        const Eigen::MatrixXd v = model.variance_matrix();
        return (v.row(ii).sum() + c.row(ii).squaredNorm()) / nd;
    }
    return -c.row(ii).dot(c.row(jj)) / (nd * (nd - 1.0));
}

double zhat_cov_difference_form(const ArrayModel& model, std::size_t i, std::size_t j) {
    const std::size_t n = model.n();
    if (i < 1 || j < 1 || i > n || j > n) throw DomainError("zhat_cov: index out of range");
    const Eigen::MatrixXd c = model.mean_matrix();
    const Eigen::MatrixXd v = model.variance_matrix();
    const double nd = static_cast<double>(n);
    const auto ii = static_cast<Eigen::Index>(i - 1), jj = static_cast<Eigen::Index>(j - 1);
    double acc = 0.0;
    const auto N = static_cast<Eigen::Index>(n);
    if (i == j) {
        for (Eigen::Index k = 0; k < N; ++k)
            for (Eigen::Index l = 0; l < N; ++l) {
                if (k == l) continue;
                const double dc = c(ii, k) - c(ii, l);
                acc += v(ii, k) + v(ii, l) + dc * dc;  // E (X_ik - X_il)^2
            }
        return (acc + 2.0 * v.row(ii).sum()) / (2.0 * nd * nd);
    }
    for (Eigen::Index k = 0; k < N; ++k)
        for (Eigen::Index l = 0; l < N; ++l) {
            if (k == l) continue;
            acc += (c(ii, k) - c(ii, l)) * (c(jj, l) - c(jj, k));
        }
    return acc / (2.0 * nd * nd * (nd - 1.0));
}

Eigen::VectorXd sample_zhat(const ArrayModel& model, RngStream& rng) {
    const auto n = static_cast<Eigen::Index>(model.n());
    const Eigen::MatrixXd xpp = model.sample_array(rng);
    Eigen::MatrixXd z(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index l = 0; l < n; ++l) z(i, l) = rng.normal();
    const Eigen::RowVectorXd zbar = z.colwise().mean();
    z.rowwise() -= zbar;
    return (xpp.cwiseProduct(z)).rowwise().sum() / std::sqrt(static_cast<double>(n) - 1.0);
}

PiecewiseConstantPath sample_dn(const ArrayModel& model, RngStream& rng) {
    const Eigen::VectorXd zh = sample_zhat(model, rng);
    const std::size_t n = model.n();
    std::vector<double> v(n + 1, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += zh[static_cast<Eigen::Index>(i)];
        v[i + 1] = acc / model.s();
    }
    return PiecewiseConstantPath::on_uniform_grid(1, static_cast<std::int64_t>(n), std::move(v));
}

double dn_covariance(const ArrayModel& model, const TimePoint& t, const TimePoint& u) {
    const auto n = static_cast<std::int64_t>(model.n());
    const auto T = static_cast<std::size_t>(t.floor_mul(n));
    const auto U = static_cast<std::size_t>(u.floor_mul(n));
    const Eigen::MatrixXd c = model.mean_matrix();
    const Eigen::MatrixXd v = model.variance_matrix();
    const double nd = static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j < U; ++j) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            if (i == j) acc += (v.row(ii).sum() + c.row(ii).squaredNorm()) / nd;
            else acc -= c.row(ii).dot(c.row(jj)) / (nd * (nd - 1.0));
        }
    return acc / (model.s() * model.s());
}

// --- bounds ---------------------------------------------------------------------

Theorem51Bound theorem51_terms(const MomentTables& m, double gnorm, bool naive) {
    const auto N = m.abs1.rows();
    const double n = static_cast<double>(N);
    if (N < 2) throw DomainError("bound needs n >= 2");
    if (!(m.s > 0.0)) throw DegenerateModelError("bound needs s_n > 0");
    if (gnorm < 0.0) throw DomainError("functional norm must be non-negative");
    const Eigen::MatrixXd& a1 = m.abs1;
    const Eigen::MatrixXd& a2 = m.abs2;
    const Eigen::MatrixXd& a3 = m.abs3;
    const Eigen::MatrixXd cabs = m.mean.cwiseAbs();
    // Q_ij = sum_r (E|X_ir|^2 + |c_ir c_jr|)
    const Eigen::VectorXd R2 = a2.rowwise().sum();
    const Eigen::MatrixXd Q = R2.replicate(1, N) + cabs * cabs.transpose();

    double sum = 0.0;
    if (naive) {
        double comp = 0.0;
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < N; ++j)
                for (Eigen::Index k = 0; k < N; ++k)
                    for (Eigen::Index l = 0; l < N; ++l)
                        for (Eigen::Index u = 0; u < N; ++u) {
                            double t = 3.0 * a3(i, k) + 5.0 * a1(i, k) * a2(i, l) + 7.0 * a2(i, k) * a1(j, l) +
                                       5.0 * a2(i, k) * a1(j, k) + 16.0 * a1(i, k) * a1(i, l) * a1(j, l) +
                                       2.0 * a1(i, u) * a1(i, k) * a1(i, l) +
                                       4.0 * a1(i, u) * a1(i, l) * a1(j, k) +
                                       6.0 * a1(u, k) * a1(i, k) * a1(j, l) +
                                       2.0 * a1(u, k) * a1(i, k) * a1(j, k);
                            t += (2.0 * a1(i, k) + 2.0 * a1(j, l) + 2.0 * a1(u, k) + 2.0 * a1(u, l)) * Q(i, j) / n;
                            // Neumaier-compensated: n^5 positive terms lose ~1e-12 relative otherwise.
                            const double y = sum + t;
                            comp += std::abs(sum) >= std::abs(t) ? (sum - y) + t : (t - y) + sum;
                            sum = y;
                        }
        sum += comp;
    } else {
        const Eigen::VectorXd R1 = a1.rowwise().sum();
        const Eigen::RowVectorXd C1 = a1.colwise().sum();
        const Eigen::RowVectorXd C2 = a2.colwise().sum();
        const double S1 = a1.sum(), S2 = a2.sum(), S3 = a3.sum();
        const Eigen::VectorXd q_row = Q.rowwise().sum();               // sum_j Q_ij
        const Eigen::RowVectorXd q_col = Q.colwise().sum();            // sum_i Q_ij
        const double Qtot = Q.sum();
        sum += 3.0 * n * n * n * S3;
        sum += 5.0 * n * n * R1.dot(R2);
        sum += 7.0 * n * S2 * S1;
        sum += 5.0 * n * n * C2.dot(C1);
        sum += 16.0 * n * R1.dot(a1 * C1.transpose());
        sum += 2.0 * n * R1.array().cube().sum();
        sum += 4.0 * R1.squaredNorm() * S1;
        sum += 6.0 * C1.squaredNorm() * S1;
        sum += 2.0 * n * C1.array().cube().sum();
        sum += (2.0 * n * n * R1.dot(q_row) + 2.0 * n * n * q_col.dot(R1.transpose()) +
                4.0 * n * S1 * Qtot) / n;
    }
    const double s = m.s;
    Theorem51Bound b;
    b.sum_term = gnorm * sum / (n * n * n * (n - 1.0) * s * s * s);
    b.root_term = 2.0 * gnorm / std::sqrt(n);
    b.variance_term = 4.0 * gnorm * m.variance.sum() / (3.0 * n * s * s);
    b.total = b.sum_term + b.root_term + b.variance_term;
    b.third_moment_term = 4.0 * gnorm * a3.sum() / (3.0 * n * s * s * s);
    b.total_third_moment_variant = b.sum_term + b.root_term + b.third_moment_term;
    return b;
}

double bound_theorem51(const ArrayModel& model, double gnorm_m1, bool naive) {
    return theorem51_terms(model.moments(), gnorm_m1, naive).total;
}

double bound_beta3(std::size_t n_, double s, double beta3, const Eigen::MatrixXd& c,
                   double sigma_sq_total, double gnorm) {
    const double n = static_cast<double>(n_);
    if (n_ < 2) throw DomainError("bound needs n >= 2");
    if (!(s > 0.0)) throw DegenerateModelError("bound needs s_n > 0");
    const Eigen::MatrixXd ca = c.cwiseAbs();
    // sum_{i,j,r} |c_ir c_jr| = sum_r (sum_i |c_ir|)^2
    const double cross = ca.colwise().sum().squaredNorm();
    const double s3 = s * s * s;
    return gnorm * (58.0 * beta3 * n * n / ((n - 1.0) * s3) +
                    8.0 * std::cbrt(beta3) * cross / (n * (n - 1.0) * s3) + 2.0 / std::sqrt(n) +
                    4.0 * sigma_sq_total / (3.0 * n * s * s));
}

std::vector<AssumptionRow> assumption_diagnostic(const ArrayModel& model,
                                                 const std::vector<TimePoint>& grid) {
    const std::size_t n = model.n();
    const double nd = static_cast<double>(n);
    const Eigen::MatrixXd c = model.mean_matrix();
    const Eigen::MatrixXd v = model.variance_matrix();
    const double s2 = model.s() * model.s();
    // E sum_k X_ik X_jk
    Eigen::MatrixXd g = c * c.transpose();
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        g(ii, ii) = v.row(ii).sum() + c.row(ii).squaredNorm();
    }
    std::vector<AssumptionRow> rows;
    for (const auto& u : grid)
        for (const auto& t : grid) {
            const auto T = static_cast<Eigen::Index>(t.floor_mul(static_cast<std::int64_t>(n)));
            const auto U = static_cast<Eigen::Index>(u.floor_mul(static_cast<std::int64_t>(n)));
            double l1 = 0.0, l2 = 0.0;
            for (Eigen::Index i = 0; i < T; ++i)
                for (Eigen::Index j = 0; j < U; ++j) {
                    l1 += g(i, j) * ((i == j ? 1.0 : 0.0) - 1.0 / nd);
                    l2 += g(i, j);
                }
            rows.push_back({u, t, l1 / (s2 * (nd - 1.0)), l2 / s2});
        }
    return rows;
}

} // namespace steinlab
