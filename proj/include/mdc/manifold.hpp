#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdc/errors.hpp"
#include "mdc/linalg.hpp"

namespace mdc {

struct PointTangent {
    VectorXd point;
    VectorXd vector;
};

/// Christoffel symbols: gamma[k](i,j) = Gamma^k_{ij}.
using Christoffel = std::vector<MatrixXd>;

/// Dense rank-4 coefficient array with one fixed dimension per index.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0) {}
    double& operator()(int i, int j, int k, int l) {
        return data_[((static_cast<std::size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l];
    }
    double operator()(int i, int j, int k, int l) const {
        return data_[((static_cast<std::size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l];
    }
    int dim() const { return dim_; }

private:
    int dim_ = 0;
    std::vector<double> data_;
};

/// Chart-described Riemannian manifold. One chart per instance; derivative
/// callbacks default to central finite differences on metric().
class Manifold {
public:
    virtual ~Manifold() = default;

    virtual int dim() const = 0;
    const std::string& name() const { return name_; }

    virtual MatrixXd metric(const VectorXd& p) const = 0;

    /// d g / d x^k, k-indexed. Default: central differences,
    /// h = cbrt(eps) * (1 + |p|).
    virtual std::vector<MatrixXd> metric_derivative(const VectorXd& p) const;

    /// d^2 g / (d x^k d x^l). Default: second differences with
    /// h = eps^(1/4) * (1 + |p|). out[k][l], symmetric in (k,l).
    virtual std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd& p) const;

    virtual bool analytic_derivatives() const { return false; }

    /// Closed-form lowered curvature tensor R_{ijkl} = g(Riem(d_i,d_j)d_k, d_l),
    /// sign convention Riem(X,Y) = grad_Y grad_X - grad_X grad_Y + grad_[X,Y].
    virtual bool has_closed_curvature() const { return false; }
    virtual Tensor4 curvature_lowered(const VectorXd& p) const;

    virtual double injectivity_radius(const VectorXd& p) const = 0;
    double injectivity_margin() const { return margin_; }

    virtual bool has_closed_geodesics() const { return false; }
    virtual PointTangent geodesic_closed(const VectorXd& p, const VectorXd& v, double t) const;

    virtual bool has_closed_distance() const { return false; }
    virtual double distance_closed(const VectorXd& x, const VectorXd& y) const;

    /// Wrap periodic coordinates into the canonical fundamental domain.
    virtual VectorXd canonical_point(const VectorXd& p) const { return p; }
    virtual bool in_chart(const VectorXd& p) const { (void)p; return true; }
    void check_chart(const VectorXd& p) const;

    /// Chart displacement to - from, reduced to the minimal representative
    /// on periodic charts.
    virtual VectorXd displacement(const VectorXd& from, const VectorXd& to) const {
        return to - from;
    }

    /// Closed-form volume of the chart-origin cap of the given radius
    /// (geodesic radius where available, chart radius on the paraboloid).
    virtual std::optional<double> cap_volume(double radius) const {
        (void)radius;
        return std::nullopt;
    }
    /// Chart radius of the ball enclosing that cap.
    virtual double cap_chart_radius(double radius) const { return radius; }

protected:
    std::string name_;
    double margin_ = 0.9;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

/// Catalog lookup by id:
///   euclidean:n | sphere2:r | hyperbolic2 | torus:n:L1,...,Ln |
///   product:<id>|<id> | paraboloid:a | spherell:r (lat-long chart)
ManifoldPtr make_manifold(const std::string& id);

/// Product access, for block-structure checks. Returns nullptrs when the
/// manifold is not a catalog product.
struct ProductSplit {
    ManifoldPtr first;
    ManifoldPtr second;
};
ProductSplit product_factors(const Manifold& m);

// ---- chart-level differential geometry --------------------------------

/// Metric with chart-domain and SPD validation.
MatrixXd metric_at(const Manifold& m, const VectorXd& p);

Christoffel christoffel_at(const Manifold& m, const VectorXd& p);

/// d Gamma^k_{ij} / d x^m: out[m][k](i,j). Analytic when the manifold
/// supplies analytic metric derivatives, otherwise nested differences.
std::vector<Christoffel> christoffel_derivative(const Manifold& m, const VectorXd& p);

struct RiemannTensor {
    Tensor4 up;   // up(i,j,k,l) = Riem^l_{ijk}
    Tensor4 low;  // low(i,j,k,l) = g(Riem(d_i,d_j)d_k, d_l)
};

RiemannTensor riemann_at(const Manifold& m, const VectorXd& p);

/// Closed form when the catalog provides one, otherwise riemann_at().low.
Tensor4 curvature_tensor(const Manifold& m, const VectorXd& p);

double sectional_curvature(const Manifold& m, const VectorXd& p,
                           const VectorXd& u, const VectorXd& v);

/// Ric(u,u) for |u|_g = 1.
double ricci_at(const Manifold& m, const VectorXd& p, const VectorXd& u);

/// Orthonormal frame at p (columns, chart components), first column
/// proportional to `first` when it is nonzero.
MatrixXd orthonormal_frame(const Manifold& m, const VectorXd& p, const VectorXd& first);

double g_inner(const MatrixXd& g, const VectorXd& a, const VectorXd& b);
double g_norm(const MatrixXd& g, const VectorXd& a);

} // namespace mdc
