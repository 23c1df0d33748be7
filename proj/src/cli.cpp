#include "steinlab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "steinlab/combinatorial.hpp"
#include "steinlab/errors.hpp"
#include "steinlab/functionals.hpp"
#include "steinlab/graph.hpp"
#include "steinlab/mc.hpp"
#include "steinlab/ou_stein.hpp"
#include "steinlab/report.hpp"

namespace steinlab {

namespace {

constexpr std::int64_t kMaxEnumerationN = 12;

struct Options {
    std::string model_file;
    std::string model_json;
    std::string functional;
    std::string grid = "8";
    std::string format = "json";
    std::string out_file;
    std::string report_file;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    long long samples = -1;
    long long trials = 5;
    double tol = std::numeric_limits<double>::quiet_NaN();
    double gnorm = 1.0;
    double scale = 1.0;
    long long n = -1;
    double p = std::numeric_limits<double>::quiet_NaN();
};

struct Model {
    std::optional<GraphModel> graph;
    std::optional<ArrayModel> array;
    nlohmann::json json;

    std::size_t dim() const { return graph ? 2 : 1; }
    std::int64_t n() const { return graph ? graph->n() : static_cast<std::int64_t>(array->n()); }
};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

Model model_from_json(const nlohmann::json& j) {
    Model m;
    m.json = j;
    if (!j.is_object()) throw DataError("model JSON must be an object");
    std::string type = j.value("type", "");
    if (type.empty()) type = (j.contains("p") && !j.contains("preset") && !j.contains("entries")) ? "graph" : "combinatorial";
    if (type == "graph") m.graph = GraphModel::from_json(j);
    else if (type == "combinatorial") m.array = ArrayModel::from_json(j);
    else throw DataError("unknown model type '" + type + "'");
    return m;
}

Model load_model(const Options& o, bool required) {
    if (!o.model_json.empty()) {
        try {
            return model_from_json(nlohmann::json::parse(o.model_json));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(std::string("model JSON does not parse: ") + e.what());
        }
    }
    if (o.model_file.empty()) {
        if (required) throw UsageError("--model FILE is required for this command");
        return {};
    }
    std::ifstream in(o.model_file);
    if (!in) throw DataError("cannot open model file '" + o.model_file + "'");
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("model file '" + o.model_file + "' does not parse: " + e.what());
    }
}

std::size_t resolve_samples(const Options& o, long long fallback) {
    const long long s = o.samples < 0 ? fallback : o.samples;
    if (s <= 0) throw UsageError("--samples must be positive");
    if (s < 2) throw UsageError("--samples must be at least 2 to form confidence intervals");
    return static_cast<std::size_t>(s);
}

double resolve_tol(const Options& o, double fallback) {
    const double t = std::isnan(o.tol) ? fallback : o.tol;
    if (!(t > 0.0)) throw UsageError("--tol must be positive");
    return t;
}

std::vector<std::string> default_functionals(std::size_t dim) {
    if (dim == 1)
        return {"sin:coord=1,t=1", "cos:coord=1,t=1/2,1,scale=2", "tanh:coord=1,t=1/3,2/3,1",
                "tanhprod:coords=1,1,t=1/2,1", "sin:coord=1,t=1/4,3/4,scale=0.5"};
    return {"sin:coord=1,t=1", "cos:coord=2,t=1/2,1,scale=2", "tanh:coord=2,t=1/3,2/3,1",
            "tanhprod:coords=1,2,t=1/2,1", "sin:coord=2,t=1/4,3/4,scale=0.5"};
}

std::string functional_spec(const Options& o) { return o.functional.empty() ? "sin:coord=1,t=1" : o.functional; }

NormBound certified_norm(const CylinderFunctional& f, NormClass c) {
    try {
        return f.norm_upper_bound(c);
    } catch (const UnsupportedError& e) {
        throw UsageError("functional '" + f.name() + "' has no certified norm bound; use one of sin, cos, "
                         "tanh, tanhprod, const (" + e.what() + ")");
    }
}

NormClass model_norm_class(const Model& m) { return m.graph ? NormClass::M2 : NormClass::M1; }

std::vector<TimePoint> parse_grid(const std::string& text) {
    std::vector<TimePoint> grid;
    const bool integer = !text.empty() && text.find_first_not_of("0123456789") == std::string::npos;
    if (integer && text != "0") {
        const long long g = std::stoll(text);
        if (g < 1 || g > 4096) throw UsageError("--grid must be between 1 and 4096 points");
        for (long long k = 1; k <= g; ++k) grid.emplace_back(k, g);
        return grid;
    }
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            grid.push_back(TimePoint::parse(tok));
        } catch (const Error& e) {
            throw UsageError("bad --grid entry '" + tok + "': " + e.what());
        }
    }
    if (grid.empty()) throw UsageError("--grid is empty");
    return grid;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// --- commands ---------------------------------------------------------------------

void cmd_simulate(const Options& o, RunReport& rep) {
    const Model m = load_model(o, true);
    const std::size_t samples = resolve_samples(o, 10000);
    const std::string spec = functional_spec(o);
    const CylinderFunctional f = parse_functional(spec, m.dim());
    rep.parameters["model"] = m.json;
    rep.parameters["functional"] = spec;
    rep.parameters["samples"] = samples;
    const SeedSpec seed{o.seed, {}};

    auto y_sampler = [&](RngStream& rng) {
        return m.graph ? sample_graph(*m.graph, rng).path : sample_y(*m.array, rng).path;
    };
    const McVector yv = monte_carlo(
        samples, seed.child(0), o.workers,
        [&](RngStream& rng, McVector& acc) {
            const PiecewiseConstantPath y = y_sampler(rng);
            acc[0].accumulate(f.eval(y));
            acc[1].accumulate(y.sup_norm());
        },
        McVector(2));
    const TargetLaw law = m.graph ? graph_law(*m.graph) : combinatorial_law(*m.array);
    rep.add_estimate("E g(Y_n)", yv[0]);
    rep.add_estimate("E g(D_n)", law.expectation(f, samples, seed.child(1), o.workers));
    rep.add_estimate("E sup|Y_n|", yv[1]);
    const Eigen::MatrixXd lam = m.graph ? Eigen::MatrixXd(lambda(*m.graph)) : combinatorial_lambda(m.array->n());
    const PairSampler pairs = m.graph ? graph_pair_sampler(*m.graph) : combinatorial_pair_sampler(*m.array);
    // gnorm = 6 gives the raw expectation E|(Y-Y')Lambda||Y-Y'|^2.
    const McEstimate raw = epsilon1_estimate(pairs, lam, 6.0, samples, seed.child(2), o.workers);
    rep.add_estimate("E |(Y-Y')Lambda| |Y-Y'|^2", raw);
    const McEstimate e3 = m.graph ? epsilon3_estimate(*m.graph, f, samples, seed.child(3), o.workers)
                                  : epsilon3_estimate(*m.array, f, samples, seed.child(3), o.workers);
    rep.add_estimate("E R_f", e3);
    if (f.certified()) {
        const double g = certified_norm(f, model_norm_class(m)).value;
        rep.add_bound("norm_upper_bound", g);
        rep.add_bound("epsilon1", g / 6.0 * raw.mean());
        rep.add_bound("epsilon3", std::abs(e3.mean()));
    }
}

void cmd_verify_regression(const Options& o, RunReport& rep) {
    const Model m = load_model(o, true);
    if (m.n() > kMaxEnumerationN)
        throw UsageError("verify-regression enumerates every exchangeable move; n = " + std::to_string(m.n()) +
                         " exceeds the limit " + std::to_string(kMaxEnumerationN) + " (use a smaller model)");
    if (o.trials < 1) throw UsageError("--trials must be positive");
    const double tol = resolve_tol(o, 1e-9);
    const std::vector<std::string> specs =
        o.functional.empty() ? default_functionals(m.dim()) : std::vector<std::string>{o.functional};
    rep.parameters["model"] = m.json;
    rep.parameters["trials"] = o.trials;
    rep.parameters["tol"] = tol;
    if (!o.functional.empty()) rep.parameters["functional"] = o.functional;
    std::vector<CylinderFunctional> fs;
    for (const auto& s : specs) fs.push_back(parse_functional(s, m.dim()));
    std::vector<double> worst(fs.size(), 0.0);
    const SeedSpec seed{o.seed, {}};
    for (long long t = 0; t < o.trials; ++t) {
        RngStream rng(seed.child(static_cast<std::uint64_t>(t)));
        if (m.graph) {
            const GraphRealization r = sample_graph(*m.graph, rng);
            for (std::size_t k = 0; k < fs.size(); ++k)
                worst[k] = std::max(worst[k], regression_residual(*m.graph, r, fs[k]));
        } else {
            const CombinatorialRealization r = sample_y(*m.array, rng);
            for (std::size_t k = 0; k < fs.size(); ++k) worst[k] = std::max(worst[k], regression_residual(r, fs[k]));
        }
    }
    for (std::size_t k = 0; k < fs.size(); ++k) {
        rep.add_estimate("max_residual[" + fs[k].name() + "]",
                         McEstimate::constant(worst[k], static_cast<std::uint64_t>(o.trials)));
        rep.add_check("regression[" + fs[k].name() + "]", worst[k] < tol,
                      "max residual " + fmt(worst[k]) + " over " + std::to_string(o.trials) + " trials",
                      "< " + fmt(tol));
    }
}

// Accumulates products x_a x_b for a zero-mean vector sample.
struct CovAcc {
    std::vector<McEstimate> cells;
    std::size_t dim = 0;
    CovAcc() = default;
    explicit CovAcc(std::size_t d) : cells(d * d), dim(d) {}
    void add(const Eigen::VectorXd& x) {
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b)
                cells[a * dim + b].accumulate(x[static_cast<Eigen::Index>(a)] * x[static_cast<Eigen::Index>(b)]);
    }
    void merge(const CovAcc& other) {
        for (std::size_t k = 0; k < cells.size(); ++k) cells[k].merge(other.cells[k]);
    }
};

// Worst standardized deviation |mc - exact| / stderr across cells (exact zero-variance cells must match).
void mc_covariance_check(RunReport& rep, const std::string& name, const CovAcc& acc, const Eigen::MatrixXd& exact,
                         double k_se) {
    double worst = 0.0;
    bool ok = true;
    for (std::size_t a = 0; a < acc.dim; ++a)
        for (std::size_t b = 0; b < acc.dim; ++b) {
            const McEstimate& e = acc.cells[a * acc.dim + b];
            const double ex = exact(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            const double se = e.std_error();
            const double dev = std::abs(e.mean() - ex);
            if (se > 0.0) {
                worst = std::max(worst, dev / se);
                if (dev > k_se * se) ok = false;
            } else if (dev > 1e-12 * std::max(1.0, std::abs(ex))) {
                ok = false;
                worst = std::numeric_limits<double>::infinity();
            }
        }
    rep.add_check(name, ok, "worst |MC - closed form| / stderr = " + fmt(worst), "<= " + fmt(k_se) + " SE per entry");
}

void cmd_verify_covariance(const Options& o, RunReport& rep) {
    Model m = load_model(o, false);
    if (!m.graph && !m.array) {
        const std::int64_t n = o.n < 0 ? 7 : o.n;
        const double p = std::isnan(o.p) ? 0.3 : o.p;
        m.graph = GraphModel(n, p);
        m.json = m.graph->to_json();
    }
    const double tol = resolve_tol(o, 1e-12);
    const std::size_t samples = resolve_samples(o, 100000);
    const std::vector<TimePoint> grid = parse_grid(o.grid);
    rep.parameters["model"] = m.json;
    rep.parameters["grid"] = o.grid;
    rep.parameters["tol"] = tol;
    rep.parameters["samples"] = samples;

    bool degenerate = true;
    for (const auto& t : grid)
        if (!(t == TimePoint(0, 1))) degenerate = false;
    if (degenerate) {
        rep.warnings.push_back("grid {0} is degenerate: every covariance vanishes, checks are vacuous");
        rep.add_check("degenerate-grid", true, "vacuous pass on t-grid {0}", "n/a");
        return;
    }
    const SeedSpec seed{o.seed, {}};
    const auto G = grid.size();

    if (m.graph) {
        const GraphModel& model = *m.graph;
        const PrelimitCovariance cov(model);
        double worst = 0.0;
        bool ok = true;
        for (const auto& t : grid)
            for (const auto& u : grid) {
                const std::pair<double, double> pairs[] = {{cov.d1d1(t, u), cov.brownian_d1d1(t, u)},
                                                           {cov.d1d2(t, u), cov.brownian_d1d2(t, u)},
                                                           {cov.d2d2(t, u), cov.brownian_d2d2(t, u)}};
                for (const auto& [a, b] : pairs) {
                    if (!close_rel(a, b, tol)) ok = false;
                    const double sc = std::max(std::abs(a), std::abs(b));
                    if (sc > 0) worst = std::max(worst, std::abs(a - b) / sc);
                }
            }
        rep.add_check("closed-form-vs-brownian-representation", ok, "worst relative difference " + fmt(worst),
                      "relative " + fmt(tol));

        worst = 0.0;
        ok = true;
        std::string where;
        for (const auto& t : grid) {
            const Eigen::Matrix2d a = cov_tv(model, t), b = cov.block(t, t);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    if (!close_rel(a(r, c), b(r, c), tol)) ok = false;
                    const double sc = std::max(std::abs(a(r, c)), std::abs(b(r, c)));
                    const double rel = sc > 0 ? std::abs(a(r, c) - b(r, c)) / sc : 0.0;
                    if (rel > worst) {
                        worst = rel;
                        where = "t=" + t.to_string() + " entry (" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ")";
                    }
                }
        }
        rep.add_check("cov_tv-vs-prelimit-block", ok,
                      "worst relative difference " + fmt(worst) + (where.empty() ? "" : " at " + where),
                      "relative " + fmt(tol));

        const Eigen::MatrixXd exact = cov.grid_matrix(grid);
        const CovAcc dn = monte_carlo(
            samples, seed.child(0), o.workers,
            [&](RngStream& rng, CovAcc& acc) {
                const PiecewiseConstantPath d = sample_dn(model, rng);
                Eigen::VectorXd x(static_cast<Eigen::Index>(2 * G));
                for (std::size_t k = 0; k < G; ++k) x.segment<2>(static_cast<Eigen::Index>(2 * k)) = d.evaluate(grid[k]);
                acc.add(x);
            },
            CovAcc(2 * G));
        mc_covariance_check(rep, "prelimit-sampler-vs-closed-form", dn, exact, 5.0);

        // The discrete process against its exact one-time covariance.
        const CovAcc y = monte_carlo(
            samples, seed.child(1), o.workers,
            [&](RngStream& rng, CovAcc& acc) {
                const PiecewiseConstantPath p = sample_graph(model, rng).path;
                Eigen::VectorXd x(static_cast<Eigen::Index>(2 * G));
                for (std::size_t k = 0; k < G; ++k) x.segment<2>(static_cast<Eigen::Index>(2 * k)) = p.evaluate(grid[k]);
                acc.add(x);
            },
            CovAcc(2 * G));
        Eigen::MatrixXd diag_exact = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * G), static_cast<Eigen::Index>(2 * G));
        for (std::size_t k = 0; k < G; ++k) {
            diag_exact.block<2, 2>(static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(2 * k)) = exact_cov_tv(model, grid[k]);
        }
        // Only the same-time blocks have a closed form here; compare those cells.
        double worst_se = 0.0;
        bool same_ok = true;
        for (std::size_t k = 0; k < G; ++k)
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t b = 0; b < 2; ++b) {
                    const McEstimate& e = y.cells[(2 * k + a) * 2 * G + 2 * k + b];
                    const double ex = diag_exact(static_cast<Eigen::Index>(2 * k + a), static_cast<Eigen::Index>(2 * k + b));
                    const double se = e.std_error();
                    const double dev = std::abs(e.mean() - ex);
                    if (se > 0) worst_se = std::max(worst_se, dev / se);
                    if (se > 0 ? dev > 5.0 * se : dev > 1e-12) same_ok = false;
                }
        rep.add_check("graph-process-vs-exact_cov_tv", same_ok, "worst |MC - exact| / stderr = " + fmt(worst_se),
                      "<= 5 SE per entry");
        for (std::size_t k = 0; k < G; ++k) {
            const std::string t = grid[k].to_string();
            rep.add_estimate("Var T_n(" + t + ")", y.cells[(2 * k) * 2 * G + 2 * k]);
            rep.add_estimate("Var V_n(" + t + ")", y.cells[(2 * k + 1) * 2 * G + 2 * k + 1]);
            rep.add_estimate("E D2_n(" + t + ")^2", dn.cells[(2 * k + 1) * 2 * G + 2 * k + 1]);
        }
        return;
    }

    const ArrayModel& model = *m.array;
    const std::size_t n = model.n();
    double worst = 0.0;
    bool ok = true;
    Eigen::MatrixXd zc(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= n; ++j) {
            const double a = zhat_cov(model, i, j), b = zhat_cov_difference_form(model, i, j);
            zc(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) = a;
            const double sc = std::max(std::abs(a), std::abs(b));
            if (sc > 0) worst = std::max(worst, std::abs(a - b) / sc);
            if (std::abs(a - b) > tol * std::max(1.0, sc)) ok = false;
        }
    rep.add_check("zhat-covariance-two-forms", ok, "worst relative difference " + fmt(worst), "relative " + fmt(tol));

    worst = 0.0;
    ok = true;
    const double s2 = model.s() * model.s();
    const auto nn = static_cast<std::int64_t>(n);
    for (const auto& t : grid)
        for (const auto& u : grid) {
            const auto T = static_cast<Eigen::Index>(t.floor_mul(nn)), U = static_cast<Eigen::Index>(u.floor_mul(nn));
            const double a = dn_covariance(model, t, u);
            const double b = T > 0 && U > 0 ? zc.topLeftCorner(T, U).sum() / s2 : 0.0;
            const double sc = std::max(std::abs(a), std::abs(b));
            if (sc > 0) worst = std::max(worst, std::abs(a - b) / sc);
            if (std::abs(a - b) > tol * std::max(1.0, sc)) ok = false;
        }
    rep.add_check("dn-covariance-vs-zhat-sums", ok, "worst relative difference " + fmt(worst), "relative " + fmt(tol));

    const CovAcc za = monte_carlo(
        samples, seed.child(0), o.workers, [&](RngStream& rng, CovAcc& acc) { acc.add(sample_zhat(model, rng)); },
        CovAcc(n));
    mc_covariance_check(rep, "zhat-sampler-vs-closed-form", za, zc, 5.0);

    Eigen::MatrixXd dexact(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(G));
    for (std::size_t a = 0; a < G; ++a)
        for (std::size_t b = 0; b < G; ++b)
            dexact(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = dn_covariance(model, grid[a], grid[b]);
    const CovAcc da = monte_carlo(
        samples, seed.child(1), o.workers,
        [&](RngStream& rng, CovAcc& acc) {
            const PiecewiseConstantPath d = sample_dn(model, rng);
            Eigen::VectorXd x(static_cast<Eigen::Index>(G));
            for (std::size_t k = 0; k < G; ++k) x[static_cast<Eigen::Index>(k)] = d.evaluate(grid[k])[0];
            acc.add(x);
        },
        CovAcc(G));
    mc_covariance_check(rep, "prelimit-sampler-vs-closed-form", da, dexact, 5.0);
}

void cmd_distance(const Options& o, RunReport& rep) {
    const Model m = load_model(o, true);
    const std::size_t samples = resolve_samples(o, 100000);
    const std::string spec = functional_spec(o);
    const CylinderFunctional f = parse_functional(spec, m.dim());
    const NormBound norm = certified_norm(f, model_norm_class(m));
    rep.parameters["model"] = m.json;
    rep.parameters["functional"] = spec;
    rep.parameters["samples"] = samples;
    const SeedSpec seed{o.seed, {}};
    const McEstimate ey = monte_carlo(
        samples, seed.child(0), o.workers,
        [&](RngStream& rng, McEstimate& acc) {
            acc.accumulate(f.eval(m.graph ? sample_graph(*m.graph, rng).path : sample_y(*m.array, rng).path));
        },
        McEstimate{});
    const TargetLaw law = m.graph ? graph_law(*m.graph) : combinatorial_law(*m.array);
    const McEstimate ed = law.expectation(f, samples, seed.child(1), o.workers);
    rep.add_estimate("E g(Y_n)", ey);
    rep.add_estimate("E g(D_n)", ed);
    const double gap = std::abs(ey.mean() - ed.mean());
    const double hw = 1.96 * std::hypot(ey.std_error(), ed.std_error());
    double bound = 0.0;
    std::string bound_name;
    if (m.graph) {
        bound = bound_prelimit(m.graph->n(), norm.value);
        bound_name = "12 |g| / n";
    } else {
        bound = bound_theorem51(*m.array, norm.value);
        bound_name = "permutation pre-limit bound";
    }
    rep.add_bound("norm_upper_bound", norm.value);
    rep.add_bound(bound_name, bound);
    rep.add_bound("gap", gap);
    rep.add_bound("gap_ci_halfwidth", hw);
    rep.add_check("distance-within-bound", gap - hw <= bound,
                  "|E g(Y_n) - E g(D_n)| = " + fmt(gap) + " +- " + fmt(hw) + " vs bound " + fmt(bound),
                  "gap - 1.96 combined stderr <= bound");
}

void cmd_coupling(const Options& o, RunReport& rep) {
    Model m = load_model(o, false);
    if (m.array) throw UsageError("coupling needs a graph model");
    if (!m.graph) {
        if (o.n < 0) throw UsageError("coupling needs --n and --p, or --model");
        m.graph = GraphModel(o.n, std::isnan(o.p) ? 0.3 : o.p);
        m.json = m.graph->to_json();
    }
    const std::size_t samples = resolve_samples(o, 10000);
    rep.parameters["model"] = m.json;
    rep.parameters["samples"] = samples;
    const CouplingReport c = coupling_distance(*m.graph, samples, SeedSpec{o.seed, {}}, o.workers);
    rep.add_estimate("E sup|Z_n - Z|", c.dist);
    rep.add_estimate("E sup|Z_n - Z|^2", c.dist_sq);
    rep.add_estimate("E sup|Z|^2", c.limit_sq);
    rep.add_estimate("grid refinement bias", c.grid_bias);
    rep.add_bound("12/sqrt(n) + 51 sqrt(ln n)/sqrt(n)", c.bound_dist);
    rep.add_bound("121/n + 743 ln n / n", c.bound_dist_sq);
    rep.add_bound("sup|Z|^2 moment", c.bound_limit_sq);
    rep.add_bound("corr(Z_n^1(1), Z^1(1))", c.corr_first);
    const std::string slack = "estimate - 1.96 stderr <= bound";
    rep.add_check("E sup|Z_n - Z|", c.pass_dist, fmt(c.dist.mean()) + " vs " + fmt(c.bound_dist), slack);
    rep.add_check("E sup|Z_n - Z|^2", c.pass_dist_sq, fmt(c.dist_sq.mean()) + " vs " + fmt(c.bound_dist_sq), slack);
    rep.add_check("E sup|Z|^2", c.pass_limit_sq, fmt(c.limit_sq.mean()) + " vs " + fmt(c.bound_limit_sq), slack);
}

void cmd_bound(const Options& o, RunReport& rep) {
    Model m = load_model(o, false);
    if (!m.graph && !m.array) {
        if (o.n < 0) throw UsageError("bound needs --model, or --n (and --p) for the graph model");
        m.graph = GraphModel(o.n, std::isnan(o.p) ? 0.3 : o.p);
        m.json = m.graph->to_json();
    }
    rep.parameters["model"] = m.json;
    double g = o.gnorm;
    if (!o.functional.empty()) {
        const CylinderFunctional f = parse_functional(o.functional, m.dim());
        const NormBound nb = certified_norm(f, model_norm_class(m));
        g = nb.value;
        rep.parameters["functional"] = o.functional;
        rep.add_bound("norm_upper_bound", g);
    } else {
        if (!(g >= 0.0)) throw UsageError("--gnorm must be non-negative");
        rep.parameters["gnorm"] = g;
    }
    if (m.graph) {
        const Eigen::Matrix2d l = lambda(*m.graph);
        rep.add_bound("pre-limit 12|g|/n", bound_prelimit(m.graph->n(), g));
        rep.add_bound("continuous-limit", bound_continuous(m.graph->n(), g));
        rep.add_bound("Lambda_11", l(0, 0));
        rep.add_bound("Lambda_12", l(0, 1));
        rep.add_bound("Lambda_21", l(1, 0));
        rep.add_bound("Lambda_22", l(1, 1));
        return;
    }
    const ArrayModel& a = *m.array;
    const MomentTables mt = a.moments();
    const Theorem51Bound b = theorem51_terms(mt, g);
    rep.add_bound("permutation pre-limit bound", b.total);
    rep.add_bound("five-index sum term", b.sum_term);
    rep.add_bound("root term", b.root_term);
    rep.add_bound("variance term", b.variance_term);
    rep.add_bound("third-moment variant total", b.total_third_moment_variant);
    rep.add_bound("beta3 bound", bound_beta3(a.n(), a.s(), mt.abs3.maxCoeff(), mt.mean, mt.variance.sum(), g));
    rep.add_bound("Lambda", combinatorial_lambda(a.n())(0, 0));
    rep.add_bound("s_n", a.s());
}

void cmd_stein_identity(const Options& o, RunReport& rep) {
    const Model m = load_model(o, true);
    const std::size_t samples = resolve_samples(o, 100000);
    const std::string spec = functional_spec(o);
    const CylinderFunctional f = parse_functional(spec, m.dim());
    if (!(o.scale > 0.0) || !std::isfinite(o.scale)) throw UsageError("--scale must be positive");
    rep.parameters["model"] = m.json;
    rep.parameters["functional"] = spec;
    rep.parameters["samples"] = samples;
    rep.parameters["scale"] = o.scale;
    TargetLaw law = m.graph ? graph_law(*m.graph) : combinatorial_law(*m.array);
    if (o.scale != 1.0) law = law.with_sampler_scale(o.scale);
    const McEstimate r = stein_identity_residual(f, law, samples, SeedSpec{o.seed, {}}, o.workers);
    rep.add_estimate("E A f(D_n)", r);
    rep.add_check("stein-identity", std::abs(r.mean()) <= 3.0 * r.std_error(),
                  "mean " + fmt(r.mean()) + ", stderr " + fmt(r.std_error()), "|mean| <= 3 SE");
}

// Reconstructs a command line from a report's parameters.
std::vector<std::string> replay_args(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report '" + path + "'");
    nlohmann::json r;
    try {
        r = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("report '" + path + "' does not parse: " + e.what());
    }
    if (!r.contains("command") || !r.contains("parameters") || !r.contains("seed"))
        throw DataError("report '" + path + "' lacks command, parameters or seed");
    std::vector<std::string> args{r["command"].get<std::string>(), "--seed",
                                  std::to_string(r["seed"].get<std::uint64_t>())};
    for (auto it = r["parameters"].begin(); it != r["parameters"].end(); ++it) {
        const auto& v = it.value();
        if (it.key() == "model") {
            args.push_back("--model-json");
            args.push_back(canonical_dump(v));
            continue;
        }
        args.push_back("--" + it.key());
        if (v.is_string()) args.push_back(v.get<std::string>());
        else if (v.is_number_float()) args.push_back(format_double(v.get<double>()));
        else args.push_back(v.dump());
    }
    return args;
}

} // namespace

int run_cli(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args = args_in;
    Options o;
    CLI::App app{"steinlab: Gaussian process approximation experiments for random permutation and random graph statistics"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("--model", o.model_file, "model JSON file");
        sc->add_option("--model-json", o.model_json, "model JSON given inline");
        sc->add_option("--seed", o.seed, "root seed");
        sc->add_option("--workers", o.workers, "worker threads (0 = all cores); never changes results");
        sc->add_option("--out", o.out_file, "write the report to FILE");
        sc->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    };
    auto add_samples = [&](CLI::App* sc) { sc->add_option("--samples", o.samples, "Monte Carlo samples"); };
    auto add_functional = [&](CLI::App* sc) {
        sc->add_option("--functional", o.functional, "functional spec, e.g. sin:coord=1,t=1/2,1");
    };

    auto* sim = app.add_subcommand("simulate", "sample the process and report moments and error terms");
    add_common(sim); add_samples(sim); add_functional(sim);
    auto* reg = app.add_subcommand("verify-regression", "exact check of the exchangeable-pair regression identity");
    add_common(reg); add_functional(reg);
    reg->add_option("--trials", o.trials, "number of sampled realizations");
    reg->add_option("--tol", o.tol, "residual tolerance (default 1e-9)");
    auto* cov = app.add_subcommand("verify-covariance", "closed-form and sampled covariance checks");
    add_common(cov); add_samples(cov);
    cov->add_option("--grid", o.grid, "G (times k/G) or a comma list of times");
    cov->add_option("--tol", o.tol, "relative tolerance of the closed-form checks (default 1e-12)");
    cov->add_option("--n", o.n, "graph size when no model is given (default 7)");
    cov->add_option("--p", o.p, "edge probability when no model is given (default 0.3)");
    auto* dist = app.add_subcommand("distance", "MC gap |E g(Y_n) - E g(D_n)| against the pre-limit bound");
    add_common(dist); add_samples(dist); add_functional(dist);
    auto* coup = app.add_subcommand("coupling", "moments of the Brownian coupling distance");
    add_common(coup); add_samples(coup);
    coup->add_option("--n", o.n, "graph size");
    coup->add_option("--p", o.p, "edge probability (default 0.3)");
    auto* bnd = app.add_subcommand("bound", "evaluate the distance bounds");
    add_common(bnd); add_functional(bnd);
    bnd->add_option("--gnorm", o.gnorm, "functional norm when no functional is given (default 1)");
    bnd->add_option("--n", o.n, "graph size when no model is given");
    bnd->add_option("--p", o.p, "edge probability when no model is given (default 0.3)");
    auto* stein = app.add_subcommand("stein-identity", "MC check that E A f(D_n) = 0");
    add_common(stein); add_samples(stein); add_functional(stein);
    stein->add_option("--scale", o.scale, "sample c * D_n instead of D_n (negative control)");
    auto* replay = app.add_subcommand("replay", "rerun the command recorded in a JSON report");
    replay->add_option("report", o.report_file, "report file")->required();
    replay->add_option("--workers", o.workers, "worker threads");
    replay->add_option("--out", o.out_file, "write the report to FILE");
    replay->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return 2;
    }

    try {
        CLI::App* chosen = app.get_subcommands().front();
        if (chosen == replay) {
            const Options keep = o;
            std::vector<std::string> again = replay_args(keep.report_file);
            again.push_back("--workers");
            again.push_back(std::to_string(keep.workers));
            again.push_back("--format");
            again.push_back(keep.format);
            if (!keep.out_file.empty()) {
                again.push_back("--out");
                again.push_back(keep.out_file);
            }
            return run_cli(again, out, err);
        }
        RunReport rep;
        rep.command = chosen->get_name();
        rep.seed = o.seed;
        if (chosen == sim) cmd_simulate(o, rep);
        else if (chosen == reg) cmd_verify_regression(o, rep);
        else if (chosen == cov) cmd_verify_covariance(o, rep);
        else if (chosen == dist) cmd_distance(o, rep);
        else if (chosen == coup) cmd_coupling(o, rep);
        else if (chosen == bnd) cmd_bound(o, rep);
        else if (chosen == stein) cmd_stein_identity(o, rep);

        for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
        const std::string text = o.format == "csv" ? rep.to_csv() : rep.to_canonical_json();
        if (o.out_file.empty()) {
            out << text;
        } else {
            std::ofstream f(o.out_file, std::ios::binary);
            if (!f) throw DataError("cannot write '" + o.out_file + "'");
            f << text;
        }
        return rep.all_pass() ? 0 : 1;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace steinlab
