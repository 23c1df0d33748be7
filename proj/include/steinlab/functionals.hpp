#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steinlab/paths.hpp"

namespace steinlab {

/// Certified sup constants of a smooth map phi: R^{k*p} -> R.
///
/// gradient_sup bounds sum_a |grad_a phi|_2, hessian_sup bounds sum_{a,b} |H_ab|_op, and
/// hessian_lipschitz bounds |H_ab(x + d) - H_ab(x)|_op / max_a |d_a|_2 for every block.
struct DerivativeBounds {
    double value_sup = 0.0;
    double gradient_sup = 0.0;
    double hessian_sup = 0.0;
    double hessian_lipschitz = 0.0;
};

/// Smooth finite-dimensional map. Inputs are laid out block-wise: x = (w(t_1), ..., w(t_k)).
class SmoothMap {
public:
    virtual ~SmoothMap() = default;

    virtual std::size_t input_size() const = 0;
    virtual double value(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const = 0;

    /// Analytic sup constants when they are known; nullopt for uncertified maps.
    virtual std::optional<DerivativeBounds> bounds() const { return std::nullopt; }
};

enum class NormClass { M0, M1, M2, M };

std::string to_string(NormClass c);
NormClass parse_norm_class(const std::string& text);

/// Upper bound on one of the functional norms, with its summands for reporting.
struct NormBound {
    NormClass norm_class = NormClass::M0;
    double value = 0.0;
    double value_term = 0.0;
    double gradient_term = 0.0;
    double hessian_term = 0.0;
    double lipschitz_term = 0.0;
};

/// g(w) = phi(w(t_1), ..., w(t_k)) for a path w with values in R^dim.
class CylinderFunctional {
public:
    CylinderFunctional(std::size_t dim, std::vector<TimePoint> times,
                       std::shared_ptr<const SmoothMap> base, std::string name);

    std::size_t dim() const { return dim_; }
    std::size_t arity() const { return times_.size(); }
    const std::vector<TimePoint>& times() const { return times_; }
    const SmoothMap& base() const { return *base_; }
    const std::shared_ptr<const SmoothMap>& shared_base() const { return base_; }
    const std::string& name() const { return name_; }

    /// (w(t_1), ..., w(t_k)) stacked into one vector of length k*dim.
    Eigen::VectorXd coordinates(const PiecewiseConstantPath& w) const;

    double eval(const PiecewiseConstantPath& w) const;
    double dderiv(const PiecewiseConstantPath& w, const PiecewiseConstantPath& h) const;
    double dderiv2(const PiecewiseConstantPath& w, const PiecewiseConstantPath& h1,
                   const PiecewiseConstantPath& h2) const;

    Eigen::VectorXd gradient_at(const PiecewiseConstantPath& w) const;
    Eigen::MatrixXd hessian_at(const PiecewiseConstantPath& w) const;

    bool certified() const { return base_->bounds().has_value(); }

    /// Sound upper bound on the requested norm; throws UnsupportedError when uncertified.
    NormBound norm_upper_bound(NormClass c) const;

private:
    std::size_t dim_;
    std::vector<TimePoint> times_;
    std::shared_ptr<const SmoothMap> base_;
    std::string name_;

    void check_dim(const PiecewiseConstantPath& w) const;
};

// --- built-in maps ---------------------------------------------------------

enum class Profile { Sin, Cos, Tanh };

/// psi(scale * sum_a x_{a, coord}) for psi in {sin, cos, tanh}.
class RidgeMap final : public SmoothMap {
public:
    RidgeMap(Profile profile, std::size_t dim, std::size_t arity, std::size_t coord, double scale);

    std::size_t input_size() const override { return dim_ * arity_; }
    double value(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;
    std::optional<DerivativeBounds> bounds() const override;

private:
    Profile profile_;
    std::size_t dim_, arity_, coord_;
    double scale_;
    double argument(const Eigen::VectorXd& x) const;
};

/// prod_a tanh(x_{a, coord_a}).
class TanhProductMap final : public SmoothMap {
public:
    TanhProductMap(std::size_t dim, std::vector<std::size_t> coords);

    std::size_t input_size() const override { return dim_ * coords_.size(); }
    double value(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;
    std::optional<DerivativeBounds> bounds() const override;

private:
    std::size_t dim_;
    std::vector<std::size_t> coords_;
};

/// sum_a x_{a, coord_a}. Unbounded, hence uncertified.
class LinearMap final : public SmoothMap {
public:
    LinearMap(std::size_t dim, std::vector<std::size_t> coords);

    std::size_t input_size() const override { return dim_ * coords_.size(); }
    double value(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;

private:
    std::size_t dim_;
    std::vector<std::size_t> coords_;
};

/// prod_i x_i over the coordinates of a single evaluation w(t). Unbounded, hence uncertified.
class ProductMap final : public SmoothMap {
public:
    explicit ProductMap(std::size_t dim) : dim_(dim) {}

    std::size_t input_size() const override { return dim_; }
    double value(const Eigen::VectorXd& x) const override { return x.prod(); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;

private:
    std::size_t dim_;
};

/// Constant map.
class ConstantMap final : public SmoothMap {
public:
    ConstantMap(std::size_t inputs, double c) : inputs_(inputs), c_(c) {}

    std::size_t input_size() const override { return inputs_; }
    double value(const Eigen::VectorXd&) const override { return c_; }
    Eigen::VectorXd gradient(const Eigen::VectorXd&) const override {
        return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(inputs_));
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd&) const override {
        const auto m = static_cast<Eigen::Index>(inputs_);
        return Eigen::MatrixXd::Zero(m, m);
    }
    std::optional<DerivativeBounds> bounds() const override {
        return DerivativeBounds{std::abs(c_), 0.0, 0.0, 0.0};
    }

private:
    std::size_t inputs_;
    double c_;
};

/// Parses the functional mini-language for paths of dimension `dim`:
///
///   sin:coord=1,t=1                 sin(w1(1))
///   cos:coord=2,t=1/2,1,scale=2     cos(2 (w2(1/2) + w2(1)))
///   tanh:coord=1,t=1                tanh(w1(1))
///   tanhprod:coords=1,2,t=1/2,1     tanh(w1(1/2)) tanh(w2(1))
///   lin:coords=1,2,t=1/2,1          w1(1/2) + w2(1)          (no certified norm)
///   prod:t=1                        w1(1) * ... * wp(1)      (no certified norm)
///   const:value=3                   3
///
/// Tokens are comma separated; a token without '=' extends the list of the previous key.
CylinderFunctional parse_functional(const std::string& spec, std::size_t dim);

} // namespace steinlab
