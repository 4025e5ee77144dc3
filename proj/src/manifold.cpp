#include "mdc/manifold.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <sstream>

namespace mdc {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double step_first(const VectorXd& p) { return std::cbrt(kEps) * (1.0 + p.norm()); }
double step_second(const VectorXd& p) { return std::pow(kEps, 0.25) * (1.0 + p.norm()); }

double wrap_coordinate(double x, double period) {
    double y = std::fmod(x, period);
    if (y < 0.0) y += period;
    return y;
}

} // namespace

double g_inner(const MatrixXd& g, const VectorXd& a, const VectorXd& b) {
    return a.dot(g * b);
}

double g_norm(const MatrixXd& g, const VectorXd& a) {
    return std::sqrt(std::max(0.0, g_inner(g, a, a)));
}

void Manifold::check_chart(const VectorXd& p) const {
    if (p.size() != dim())
        throw ChartDomainError(name_ + ": point has wrong dimension");
    if (!in_chart(p)) {
        std::ostringstream os;
        os << name_ << ": point outside chart domain: [" << p.transpose() << "]";
        throw ChartDomainError(os.str());
    }
}

std::vector<MatrixXd> Manifold::metric_derivative(const VectorXd& p) const {
    const int n = dim();
    const double h = step_first(p);
    std::vector<MatrixXd> out(n);
    for (int k = 0; k < n; ++k) {
        VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        out[k] = (metric(pp) - metric(pm)) / (2.0 * h);
    }
    return out;
}

std::vector<std::vector<MatrixXd>> Manifold::metric_second_derivative(const VectorXd& p) const {
    const int n = dim();
    const double h = step_second(p);
    std::vector<std::vector<MatrixXd>> out(n, std::vector<MatrixXd>(n));
    const MatrixXd g0 = metric(p);
    for (int k = 0; k < n; ++k) {
        VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        out[k][k] = (metric(pp) - 2.0 * g0 + metric(pm)) / (h * h);
    }
    for (int k = 0; k < n; ++k) {
        for (int l = k + 1; l < n; ++l) {
            VectorXd a = p, b = p, c = p, d = p;
            a[k] += h; a[l] += h;
            b[k] += h; b[l] -= h;
            c[k] -= h; c[l] += h;
            d[k] -= h; d[l] -= h;
            out[k][l] = (metric(a) - metric(b) - metric(c) + metric(d)) / (4.0 * h * h);
            out[l][k] = out[k][l];
        }
    }
    return out;
}

Tensor4 Manifold::curvature_lowered(const VectorXd&) const {
    throw std::logic_error(name_ + ": no closed-form curvature");
}

PointTangent Manifold::geodesic_closed(const VectorXd&, const VectorXd&, double) const {
    throw std::logic_error(name_ + ": no closed-form geodesics");
}

double Manifold::distance_closed(const VectorXd&, const VectorXd&) const {
    throw std::logic_error(name_ + ": no closed-form distance");
}

// ---- catalog ------------------------------------------------------------

namespace {

/// 2D lowered curvature of a surface with Gaussian curvature K at p:
/// R_{ijkl} = K (g_ik g_jl - g_jk g_il).
Tensor4 gauss_curvature_lowered(const MatrixXd& g, double K) {
    Tensor4 t(2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    t(i, j, k, l) = K * (g(i, k) * g(j, l) - g(j, k) * g(i, l));
    return t;
}

class Euclidean final : public Manifold {
public:
    explicit Euclidean(int n) : n_(n) { name_ = "euclidean:" + std::to_string(n); }
    int dim() const override { return n_; }
    MatrixXd metric(const VectorXd&) const override { return MatrixXd::Identity(n_, n_); }
    std::vector<MatrixXd> metric_derivative(const VectorXd&) const override {
        return std::vector<MatrixXd>(n_, MatrixXd::Zero(n_, n_));
    }
    std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd&) const override {
        return std::vector<std::vector<MatrixXd>>(n_, std::vector<MatrixXd>(n_, MatrixXd::Zero(n_, n_)));
    }
    bool analytic_derivatives() const override { return true; }
    bool has_closed_curvature() const override { return true; }
    Tensor4 curvature_lowered(const VectorXd&) const override { return Tensor4(n_); }
    double injectivity_radius(const VectorXd&) const override {
        return std::numeric_limits<double>::infinity();
    }
    bool has_closed_geodesics() const override { return true; }
    PointTangent geodesic_closed(const VectorXd& p, const VectorXd& v, double t) const override {
        return {p + t * v, v};
    }
    bool has_closed_distance() const override { return true; }
    double distance_closed(const VectorXd& x, const VectorXd& y) const override {
        return (x - y).norm();
    }
    std::optional<double> cap_volume(double radius) const override {
        return std::pow(M_PI, 0.5 * n_) / std::tgamma(0.5 * n_ + 1.0) * std::pow(radius, n_);
    }

private:
    int n_;
};

class FlatTorus final : public Manifold {
public:
    explicit FlatTorus(VectorXd sides) : sides_(std::move(sides)) {
        std::ostringstream os;
        os << "torus:" << sides_.size() << ":";
        for (int i = 0; i < sides_.size(); ++i) os << (i ? "," : "") << sides_[i];
        name_ = os.str();
    }
    int dim() const override { return static_cast<int>(sides_.size()); }
    const VectorXd& sides() const { return sides_; }
    MatrixXd metric(const VectorXd&) const override {
        const int n = dim();
        return MatrixXd::Identity(n, n);
    }
    std::vector<MatrixXd> metric_derivative(const VectorXd&) const override {
        const int n = dim();
        return std::vector<MatrixXd>(n, MatrixXd::Zero(n, n));
    }
    std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd&) const override {
        const int n = dim();
        return std::vector<std::vector<MatrixXd>>(n, std::vector<MatrixXd>(n, MatrixXd::Zero(n, n)));
    }
    bool analytic_derivatives() const override { return true; }
    bool has_closed_curvature() const override { return true; }
    Tensor4 curvature_lowered(const VectorXd&) const override { return Tensor4(dim()); }
    double injectivity_radius(const VectorXd&) const override { return sides_.minCoeff() / 2.0; }
    bool has_closed_geodesics() const override { return true; }
    PointTangent geodesic_closed(const VectorXd& p, const VectorXd& v, double t) const override {
        return {canonical_point(p + t * v), v};
    }
    bool has_closed_distance() const override { return true; }
    double distance_closed(const VectorXd& x, const VectorXd& y) const override {
        double s = 0.0;
        for (int i = 0; i < sides_.size(); ++i) {
            const double d = std::abs(wrap_coordinate(x[i] - y[i], sides_[i]));
            const double w = std::min(d, sides_[i] - d);
            s += w * w;
        }
        return std::sqrt(s);
    }
    VectorXd canonical_point(const VectorXd& p) const override {
        VectorXd q = p;
        for (int i = 0; i < sides_.size(); ++i) q[i] = wrap_coordinate(q[i], sides_[i]);
        return q;
    }
    VectorXd displacement(const VectorXd& from, const VectorXd& to) const override {
        VectorXd d = to - from;
        for (int i = 0; i < sides_.size(); ++i) {
            d[i] = wrap_coordinate(d[i], sides_[i]);
            if (d[i] > 0.5 * sides_[i]) d[i] -= sides_[i];
        }
        return d;
    }
    std::optional<double> cap_volume(double radius) const override {
        if (radius >= 0.5 * sides_.minCoeff()) return std::nullopt;
        const int n = dim();
        return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0) * std::pow(radius, n);
    }

private:
    VectorXd sides_;
};

/// Base for 2D conformal charts g = lambda(p)^2 I.
class Conformal2D : public Manifold {
public:
    int dim() const override { return 2; }
    MatrixXd metric(const VectorXd& p) const override {
        const double l = lambda(p);
        return l * l * MatrixXd::Identity(2, 2);
    }
    std::vector<MatrixXd> metric_derivative(const VectorXd& p) const override {
        const double l = lambda(p);
        const VectorXd dl = lambda_grad(p);
        std::vector<MatrixXd> out(2);
        for (int k = 0; k < 2; ++k) out[k] = 2.0 * l * dl[k] * MatrixXd::Identity(2, 2);
        return out;
    }
    std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd& p) const override {
        const double l = lambda(p);
        const VectorXd dl = lambda_grad(p);
        const MatrixXd d2l = lambda_hess(p);
        std::vector<std::vector<MatrixXd>> out(2, std::vector<MatrixXd>(2));
        for (int k = 0; k < 2; ++k)
            for (int m = 0; m < 2; ++m)
                out[k][m] = 2.0 * (dl[k] * dl[m] + l * d2l(k, m)) * MatrixXd::Identity(2, 2);
        return out;
    }
    bool analytic_derivatives() const override { return true; }
    bool has_closed_curvature() const override { return true; }
    Tensor4 curvature_lowered(const VectorXd& p) const override {
        return gauss_curvature_lowered(metric(p), gauss_curvature(p));
    }

    virtual double lambda(const VectorXd& p) const = 0;
    virtual VectorXd lambda_grad(const VectorXd& p) const = 0;
    virtual MatrixXd lambda_hess(const VectorXd& p) const = 0;
    virtual double gauss_curvature(const VectorXd& p) const = 0;
};

/// Round sphere of radius r, stereographic chart from the pole opposite the
/// chart origin; the chart origin is the center of the working cap.
class SphereStereo final : public Conformal2D {
public:
    explicit SphereStereo(double r) : r_(r) {
        std::ostringstream os;
        os << "sphere2:" << r;
        name_ = os.str();
    }
    double radius() const { return r_; }
    double lambda(const VectorXd& p) const override {
        return 2.0 * r_ * r_ / (r_ * r_ + p.squaredNorm());
    }
    VectorXd lambda_grad(const VectorXd& p) const override {
        const double d = r_ * r_ + p.squaredNorm();
        return (-4.0 * r_ * r_ / (d * d)) * p;
    }
    MatrixXd lambda_hess(const VectorXd& p) const override {
        const double d = r_ * r_ + p.squaredNorm();
        return (-4.0 * r_ * r_ / (d * d)) * MatrixXd::Identity(2, 2) +
               (16.0 * r_ * r_ / (d * d * d)) * p * p.transpose();
    }
    double gauss_curvature(const VectorXd&) const override { return 1.0 / (r_ * r_); }
    double injectivity_radius(const VectorXd&) const override { return M_PI * r_; }

    Eigen::Vector3d embed(const VectorXd& p) const {
        const double d = r_ * r_ + p.squaredNorm();
        return {2.0 * r_ * r_ * p[0] / d, 2.0 * r_ * r_ * p[1] / d,
                r_ * (p.squaredNorm() - r_ * r_) / d};
    }
    Eigen::Vector3d embed_tangent(const VectorXd& p, const VectorXd& v) const {
        const double d = r_ * r_ + p.squaredNorm();
        Eigen::Vector3d out;
        for (int a = 0; a < 2; ++a) {
            double s = 0.0;
            for (int k = 0; k < 2; ++k) {
                const double jac = 2.0 * r_ * r_ * ((a == k ? d : 0.0) - 2.0 * p[a] * p[k]) / (d * d);
                s += jac * v[k];
            }
            out[a] = s;
        }
        double s = 0.0;
        for (int k = 0; k < 2; ++k) s += 4.0 * r_ * r_ * r_ * p[k] / (d * d) * v[k];
        out[2] = s;
        return out;
    }
    VectorXd unembed(const Eigen::Vector3d& x) const {
        VectorXd p(2);
        p[0] = r_ * x[0] / (r_ - x[2]);
        p[1] = r_ * x[1] / (r_ - x[2]);
        return p;
    }

    bool has_closed_geodesics() const override { return true; }
    PointTangent geodesic_closed(const VectorXd& p, const VectorXd& v, double t) const override {
        const double sigma = g_norm(metric(p), v);
        if (sigma < 1e-300) return {p, v};
        const Eigen::Vector3d x0 = embed(p);
        const Eigen::Vector3d w = embed_tangent(p, v);
        const Eigen::Vector3d that = w.normalized();
        const double phase = sigma * t / r_;
        const Eigen::Vector3d xt = std::cos(phase) * x0 + r_ * std::sin(phase) * that;
        const Eigen::Vector3d wt = sigma * (-std::sin(phase) / r_ * x0 + std::cos(phase) * that);
        // pull velocity back through the inverse chart differential
        const VectorXd pt = unembed(xt);
        const double rz = r_ - xt[2];
        VectorXd vt(2);
        vt[0] = r_ * (wt[0] * rz + xt[0] * wt[2]) / (rz * rz);
        vt[1] = r_ * (wt[1] * rz + xt[1] * wt[2]) / (rz * rz);
        return {pt, vt};
    }
    bool has_closed_distance() const override { return true; }
    double distance_closed(const VectorXd& x, const VectorXd& y) const override {
        const double c = embed(x).dot(embed(y)) / (r_ * r_);
        return r_ * std::acos(std::clamp(c, -1.0, 1.0));
    }
    std::optional<double> cap_volume(double radius) const override {
        const double alpha = radius / r_;
        if (alpha <= 0.0 || alpha >= M_PI) return std::nullopt;
        return 2.0 * M_PI * r_ * r_ * (1.0 - std::cos(alpha));
    }
    double cap_chart_radius(double radius) const override {
        return r_ * std::tan(0.5 * radius / r_);
    }

private:
    double r_;
};

/// Poincare disk, curvature -1.
class Hyperbolic2 final : public Conformal2D {
public:
    Hyperbolic2() { name_ = "hyperbolic2"; }
    double lambda(const VectorXd& p) const override { return 2.0 / (1.0 - p.squaredNorm()); }
    VectorXd lambda_grad(const VectorXd& p) const override {
        const double d = 1.0 - p.squaredNorm();
        return (4.0 / (d * d)) * p;
    }
    MatrixXd lambda_hess(const VectorXd& p) const override {
        const double d = 1.0 - p.squaredNorm();
        return (4.0 / (d * d)) * MatrixXd::Identity(2, 2) +
               (16.0 / (d * d * d)) * p * p.transpose();
    }
    double gauss_curvature(const VectorXd&) const override { return -1.0; }
    double injectivity_radius(const VectorXd&) const override {
        return std::numeric_limits<double>::infinity();
    }
    bool in_chart(const VectorXd& p) const override { return p.squaredNorm() < 1.0; }
    bool has_closed_distance() const override { return true; }
    double distance_closed(const VectorXd& x, const VectorXd& y) const override {
        const double num = 2.0 * (x - y).squaredNorm();
        const double den = (1.0 - x.squaredNorm()) * (1.0 - y.squaredNorm());
        return std::acosh(1.0 + num / den);
    }
    std::optional<double> cap_volume(double radius) const override {
        const double s = std::sinh(0.5 * radius);
        return 4.0 * M_PI * s * s;
    }
    double cap_chart_radius(double radius) const override { return std::tanh(0.5 * radius); }
};

/// Surface of revolution z = a (x^2 + y^2), graph chart.
class Paraboloid final : public Manifold {
public:
    explicit Paraboloid(double a) : a_(a) {
        std::ostringstream os;
        os << "paraboloid:" << a;
        name_ = os.str();
    }
    int dim() const override { return 2; }
    MatrixXd metric(const VectorXd& p) const override {
        return MatrixXd::Identity(2, 2) + 4.0 * a_ * a_ * p * p.transpose();
    }
    std::vector<MatrixXd> metric_derivative(const VectorXd& p) const override {
        std::vector<MatrixXd> out(2, MatrixXd::Zero(2, 2));
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    out[k](i, j) = 4.0 * a_ * a_ * ((i == k ? p[j] : 0.0) + (j == k ? p[i] : 0.0));
        return out;
    }
    std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd&) const override {
        std::vector<std::vector<MatrixXd>> out(2, std::vector<MatrixXd>(2, MatrixXd::Zero(2, 2)));
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j)
                        out[k][l](i, j) = 4.0 * a_ * a_ *
                            ((i == k && j == l ? 1.0 : 0.0) + (i == l && j == k ? 1.0 : 0.0));
        return out;
    }
    bool analytic_derivatives() const override { return true; }
    bool has_closed_curvature() const override { return true; }
    Tensor4 curvature_lowered(const VectorXd& p) const override {
        const double d = 1.0 + 4.0 * a_ * a_ * p.squaredNorm();
        return gauss_curvature_lowered(metric(p), 4.0 * a_ * a_ / (d * d));
    }
    double injectivity_radius(const VectorXd&) const override { return M_PI / (2.0 * a_); }
    std::optional<double> cap_volume(double radius) const override {
        const double q = 1.0 + 4.0 * a_ * a_ * radius * radius;
        return M_PI / (6.0 * a_ * a_) * (std::pow(q, 1.5) - 1.0);
    }

private:
    double a_;
};

/// Round sphere in latitude-longitude coordinates (theta, phi); used by the
/// grid-based transport machinery, which wants a rectangular chart.
class SphereLatLong final : public Manifold {
public:
    explicit SphereLatLong(double r) : r_(r) {
        std::ostringstream os;
        os << "spherell:" << r;
        name_ = os.str();
    }
    int dim() const override { return 2; }
    double radius() const { return r_; }
    MatrixXd metric(const VectorXd& p) const override {
        MatrixXd g = MatrixXd::Zero(2, 2);
        const double s = std::sin(p[0]);
        g(0, 0) = r_ * r_;
        g(1, 1) = r_ * r_ * s * s;
        return g;
    }
    std::vector<MatrixXd> metric_derivative(const VectorXd& p) const override {
        std::vector<MatrixXd> out(2, MatrixXd::Zero(2, 2));
        out[0](1, 1) = 2.0 * r_ * r_ * std::sin(p[0]) * std::cos(p[0]);
        return out;
    }
    std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd& p) const override {
        std::vector<std::vector<MatrixXd>> out(2, std::vector<MatrixXd>(2, MatrixXd::Zero(2, 2)));
        out[0][0](1, 1) = 2.0 * r_ * r_ * std::cos(2.0 * p[0]);
        return out;
    }
    bool analytic_derivatives() const override { return true; }
    bool has_closed_curvature() const override { return true; }
    Tensor4 curvature_lowered(const VectorXd& p) const override {
        return gauss_curvature_lowered(metric(p), 1.0 / (r_ * r_));
    }
    double injectivity_radius(const VectorXd&) const override { return M_PI * r_; }
    bool in_chart(const VectorXd& p) const override {
        return p[0] > 0.02 && p[0] < M_PI - 0.02;
    }
    VectorXd canonical_point(const VectorXd& p) const override {
        VectorXd q = p;
        q[1] = wrap_coordinate(q[1], 2.0 * M_PI);
        return q;
    }
    VectorXd displacement(const VectorXd& from, const VectorXd& to) const override {
        VectorXd d = to - from;
        d[1] = wrap_coordinate(d[1], 2.0 * M_PI);
        if (d[1] > M_PI) d[1] -= 2.0 * M_PI;
        return d;
    }
    Eigen::Vector3d embed(const VectorXd& p) const {
        return {r_ * std::sin(p[0]) * std::cos(p[1]),
                r_ * std::sin(p[0]) * std::sin(p[1]),
                r_ * std::cos(p[0])};
    }
    bool has_closed_distance() const override { return true; }
    double distance_closed(const VectorXd& x, const VectorXd& y) const override {
        const double c = embed(x).dot(embed(y)) / (r_ * r_);
        return r_ * std::acos(std::clamp(c, -1.0, 1.0));
    }

private:
    double r_;
};

class Product final : public Manifold {
public:
    Product(ManifoldPtr a, ManifoldPtr b) : a_(std::move(a)), b_(std::move(b)) {
        name_ = "product:" + a_->name() + "|" + b_->name();
    }
    ManifoldPtr first() const { return a_; }
    ManifoldPtr second() const { return b_; }
    int dim() const override { return a_->dim() + b_->dim(); }

    MatrixXd metric(const VectorXd& p) const override {
        const int n = dim(), na = a_->dim();
        MatrixXd g = MatrixXd::Zero(n, n);
        g.topLeftCorner(na, na) = a_->metric(p.head(na));
        g.bottomRightCorner(n - na, n - na) = b_->metric(p.tail(n - na));
        return g;
    }
    std::vector<MatrixXd> metric_derivative(const VectorXd& p) const override {
        const int n = dim(), na = a_->dim();
        const auto da = a_->metric_derivative(p.head(na));
        const auto db = b_->metric_derivative(p.tail(n - na));
        std::vector<MatrixXd> out(n, MatrixXd::Zero(n, n));
        for (int k = 0; k < na; ++k) out[k].topLeftCorner(na, na) = da[k];
        for (int k = na; k < n; ++k) out[k].bottomRightCorner(n - na, n - na) = db[k - na];
        return out;
    }
    std::vector<std::vector<MatrixXd>> metric_second_derivative(const VectorXd& p) const override {
        const int n = dim(), na = a_->dim();
        const auto da = a_->metric_second_derivative(p.head(na));
        const auto db = b_->metric_second_derivative(p.tail(n - na));
        std::vector<std::vector<MatrixXd>> out(n, std::vector<MatrixXd>(n, MatrixXd::Zero(n, n)));
        for (int k = 0; k < na; ++k)
            for (int l = 0; l < na; ++l)
                out[k][l].topLeftCorner(na, na) = da[k][l];
        for (int k = na; k < n; ++k)
            for (int l = na; l < n; ++l)
                out[k][l].bottomRightCorner(n - na, n - na) = db[k - na][l - na];
        return out;
    }
    bool analytic_derivatives() const override {
        return a_->analytic_derivatives() && b_->analytic_derivatives();
    }
    bool has_closed_curvature() const override {
        return a_->has_closed_curvature() && b_->has_closed_curvature();
    }
    Tensor4 curvature_lowered(const VectorXd& p) const override {
        const int n = dim(), na = a_->dim();
        const Tensor4 ra = a_->curvature_lowered(p.head(na));
        const Tensor4 rb = b_->curvature_lowered(p.tail(n - na));
        Tensor4 t(n);
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < na; ++j)
                for (int k = 0; k < na; ++k)
                    for (int l = 0; l < na; ++l)
                        t(i, j, k, l) = ra(i, j, k, l);
        for (int i = 0; i < n - na; ++i)
            for (int j = 0; j < n - na; ++j)
                for (int k = 0; k < n - na; ++k)
                    for (int l = 0; l < n - na; ++l)
                        t(i + na, j + na, k + na, l + na) = rb(i, j, k, l);
        return t;
    }
    double injectivity_radius(const VectorXd& p) const override {
        const int na = a_->dim();
        return std::min(a_->injectivity_radius(p.head(na)),
                        b_->injectivity_radius(p.tail(dim() - na)));
    }
    bool has_closed_geodesics() const override {
        return a_->has_closed_geodesics() && b_->has_closed_geodesics();
    }
    PointTangent geodesic_closed(const VectorXd& p, const VectorXd& v, double t) const override {
        const int n = dim(), na = a_->dim();
        const PointTangent ga = a_->geodesic_closed(p.head(na), v.head(na), t);
        const PointTangent gb = b_->geodesic_closed(p.tail(n - na), v.tail(n - na), t);
        PointTangent out{VectorXd(n), VectorXd(n)};
        out.point << ga.point, gb.point;
        out.vector << ga.vector, gb.vector;
        return out;
    }
    bool has_closed_distance() const override {
        return a_->has_closed_distance() && b_->has_closed_distance();
    }
    double distance_closed(const VectorXd& x, const VectorXd& y) const override {
        const int n = dim(), na = a_->dim();
        const double da = a_->distance_closed(x.head(na), y.head(na));
        const double db = b_->distance_closed(x.tail(n - na), y.tail(n - na));
        return std::sqrt(da * da + db * db);
    }
    VectorXd canonical_point(const VectorXd& p) const override {
        const int n = dim(), na = a_->dim();
        VectorXd q(n);
        q.head(na) = a_->canonical_point(p.head(na));
        q.tail(n - na) = b_->canonical_point(p.tail(n - na));
        return q;
    }
    bool in_chart(const VectorXd& p) const override {
        const int na = a_->dim();
        return a_->in_chart(p.head(na)) && b_->in_chart(p.tail(dim() - na));
    }
    VectorXd displacement(const VectorXd& from, const VectorXd& to) const override {
        const int n = dim(), na = a_->dim();
        VectorXd d(n);
        d.head(na) = a_->displacement(from.head(na), to.head(na));
        d.tail(n - na) = b_->displacement(from.tail(n - na), to.tail(n - na));
        return d;
    }

private:
    ManifoldPtr a_;
    ManifoldPtr b_;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_real(const std::string& s, const std::string& id) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + s + "' in manifold id '" + id + "'");
    }
}

int parse_int(const std::string& s, const std::string& id) {
    const double v = parse_real(s, id);
    const int n = static_cast<int>(v);
    if (n != v || n <= 0) throw ConfigError("bad positive integer '" + s + "' in '" + id + "'");
    return n;
}

} // namespace

ManifoldPtr make_manifold(const std::string& id) {
    if (id.rfind("product:", 0) == 0) {
        const std::string rest = id.substr(8);
        const auto parts = split(rest, '|');
        if (parts.size() != 2) throw ConfigError("product id wants exactly two factors: " + id);
        return std::make_shared<Product>(make_manifold(parts[0]), make_manifold(parts[1]));
    }
    const auto parts = split(id, ':');
    const std::string& kind = parts[0];
    if (kind == "euclidean") {
        if (parts.size() != 2) throw ConfigError("euclidean:n expected: " + id);
        return std::make_shared<Euclidean>(parse_int(parts[1], id));
    }
    if (kind == "sphere2") {
        if (parts.size() != 2) throw ConfigError("sphere2:r expected: " + id);
        return std::make_shared<SphereStereo>(parse_real(parts[1], id));
    }
    if (kind == "spherell") {
        if (parts.size() != 2) throw ConfigError("spherell:r expected: " + id);
        return std::make_shared<SphereLatLong>(parse_real(parts[1], id));
    }
    if (kind == "hyperbolic2") {
        if (parts.size() != 1) throw ConfigError("hyperbolic2 takes no parameters: " + id);
        return std::make_shared<Hyperbolic2>();
    }
    if (kind == "torus") {
        if (parts.size() != 3) throw ConfigError("torus:n:L1,...,Ln expected: " + id);
        const int n = parse_int(parts[1], id);
        const auto ls = split(parts[2], ',');
        if (static_cast<int>(ls.size()) != n)
            throw ConfigError("torus side count mismatch: " + id);
        VectorXd sides(n);
        for (int i = 0; i < n; ++i) {
            sides[i] = parse_real(ls[i], id);
            if (sides[i] <= 0.0) throw ConfigError("torus sides must be positive: " + id);
        }
        return std::make_shared<FlatTorus>(sides);
    }
    if (kind == "paraboloid") {
        if (parts.size() != 2) throw ConfigError("paraboloid:a expected: " + id);
        const double a = parse_real(parts[1], id);
        if (a <= 0.0) throw ConfigError("paraboloid:a wants a > 0: " + id);
        return std::make_shared<Paraboloid>(a);
    }
    throw ConfigError("unknown manifold id: " + id);
}

ProductSplit product_factors(const Manifold& m) {
    if (const auto* prod = dynamic_cast<const Product*>(&m))
        return {prod->first(), prod->second()};
    return {nullptr, nullptr};
}

// ---- chart-level operations ----------------------------------------------

MatrixXd metric_at(const Manifold& m, const VectorXd& p) {
    m.check_chart(p);
    MatrixXd g = symmetrize(m.metric(p));
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success)
        throw ChartDomainError(m.name() + ": metric not positive definite at queried point");
    return g;
}

Christoffel christoffel_at(const Manifold& m, const VectorXd& p) {
    const int n = m.dim();
    const MatrixXd g = m.metric(p);
    const MatrixXd ginv = g.inverse();
    const auto dg = m.metric_derivative(p);
    Christoffel gamma(n, MatrixXd::Zero(n, n));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double s = 0.0;
                for (int l = 0; l < n; ++l)
                    s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
                gamma[k](i, j) = 0.5 * s;
                gamma[k](j, i) = gamma[k](i, j);
            }
    return gamma;
}

std::vector<Christoffel> christoffel_derivative(const Manifold& m, const VectorXd& p) {
    const int n = m.dim();
    if (m.analytic_derivatives()) {
        const MatrixXd g = m.metric(p);
        const MatrixXd ginv = g.inverse();
        const auto dg = m.metric_derivative(p);
        const auto ddg = m.metric_second_derivative(p);
        std::vector<Christoffel> out(n, Christoffel(n, MatrixXd::Zero(n, n)));
        for (int mm = 0; mm < n; ++mm) {
            const MatrixXd dginv = -ginv * dg[mm] * ginv;
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int l = 0; l < n; ++l) {
                            s += dginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
                            s += ginv(k, l) * (ddg[mm][i](j, l) + ddg[mm][j](i, l) - ddg[mm][l](i, j));
                        }
                        out[mm][k](i, j) = 0.5 * s;
                    }
        }
        return out;
    }
    // nested differences: effectively second derivatives of the metric
    const double h = step_second(p);
    std::vector<Christoffel> out(n);
    for (int mm = 0; mm < n; ++mm) {
        VectorXd pp = p, pm = p;
        pp[mm] += h;
        pm[mm] -= h;
        const Christoffel gp = christoffel_at(m, pp);
        const Christoffel gm = christoffel_at(m, pm);
        Christoffel d(n, MatrixXd::Zero(n, n));
        for (int k = 0; k < n; ++k) d[k] = (gp[k] - gm[k]) / (2.0 * h);
        out[mm] = d;
    }
    return out;
}

RiemannTensor riemann_at(const Manifold& m, const VectorXd& p) {
    m.check_chart(p);
    const int n = m.dim();
    const MatrixXd g = m.metric(p);
    const Christoffel gamma = christoffel_at(m, p);

    const std::vector<Christoffel> dgamma = christoffel_derivative(m, p);

    RiemannTensor out;
    out.up = Tensor4(n);
    out.low = Tensor4(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    double s = dgamma[j][l](i, k) - dgamma[i][l](j, k);
                    for (int mm = 0; mm < n; ++mm)
                        s += gamma[mm](i, k) * gamma[l](j, mm) - gamma[mm](j, k) * gamma[l](i, mm);
                    out.up(i, j, k, l) = s;
                }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    double s = 0.0;
                    for (int mm = 0; mm < n; ++mm) s += out.up(i, j, k, mm) * g(mm, l);
                    out.low(i, j, k, l) = s;
                }
    return out;
}

Tensor4 curvature_tensor(const Manifold& m, const VectorXd& p) {
    if (m.has_closed_curvature()) return m.curvature_lowered(p);
    return riemann_at(m, p).low;
}

double sectional_curvature(const Manifold& m, const VectorXd& p,
                           const VectorXd& u, const VectorXd& v) {
    const int n = m.dim();
    const MatrixXd g = m.metric(p);
    const Tensor4 r = curvature_tensor(m, p);
    double num = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    num += r(i, j, k, l) * u[i] * v[j] * u[k] * v[l];
    const double uu = g_inner(g, u, u), vv = g_inner(g, v, v), uv = g_inner(g, u, v);
    const double den = uu * vv - uv * uv;
    if (den <= 1e-12 * std::max(1.0, uu * vv))
        throw std::invalid_argument(m.name() + ": sectional_curvature: degenerate plane");
    return num / den;
}

double ricci_at(const Manifold& m, const VectorXd& p, const VectorXd& u) {
    const int n = m.dim();
    const MatrixXd ginv = m.metric(p).inverse();
    const Tensor4 r = curvature_tensor(m, p);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    s += r(i, j, k, l) * u[i] * u[k] * ginv(j, l);
    return s;
}

MatrixXd orthonormal_frame(const Manifold& m, const VectorXd& p, const VectorXd& first) {
    const int n = m.dim();
    const MatrixXd g = m.metric(p);
    std::vector<VectorXd> candidates;
    if (first.size() == n && g_norm(g, first) > 1e-12 * (1.0 + first.norm()))
        candidates.push_back(first);
    for (int i = 0; i < n; ++i) candidates.push_back(VectorXd::Unit(n, i));

    MatrixXd frame(n, n);
    int filled = 0;
    for (const auto& cand : candidates) {
        if (filled == n) break;
        VectorXd w = cand;
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < filled; ++j)
                w -= g_inner(g, frame.col(j), w) * frame.col(j);
        const double nw = g_norm(g, w);
        if (nw <= 1e-8 * std::max(1.0, g_norm(g, cand))) continue;
        frame.col(filled++) = w / nw;
    }
    if (filled != n)
        throw std::logic_error(m.name() + ": failed to build an orthonormal frame");
    return frame;
}

} // namespace mdc
