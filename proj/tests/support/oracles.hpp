#pragma once

// Independent reference computations used only by tests. Everything here is
// deliberately written along a different route than the library code it
// cross-checks.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mdc/manifold.hpp"
#include "mdc/rng.hpp"

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_symmetric(mdc::Rng& rng, int n, double scale = 1.0) {
    MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = scale * rng.normal();
    return 0.5 * (a + a.transpose());
}

/// Orthonormal basis from Gram-Schmidt on a random Gaussian matrix.
inline MatrixXd random_orthonormal(mdc::Rng& rng, int n) {
    MatrixXd q(n, n);
    for (;;) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) q(i, j) = rng.normal();
        bool ok = true;
        for (int c = 0; c < n && ok; ++c) {
            for (int pass = 0; pass < 2; ++pass)
                for (int j = 0; j < c; ++j) q.col(c) -= q.col(j).dot(q.col(c)) * q.col(j);
            const double nc = q.col(c).norm();
            if (nc < 1e-6) ok = false;
            else q.col(c) /= nc;
        }
        if (ok) return q;
    }
}

/// Matrix function by truncated power series sum_k c_k A^k.
inline MatrixXd series_apply(const MatrixXd& a, const std::vector<double>& coeffs) {
    MatrixXd term = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd out = coeffs[0] * term;
    for (std::size_t k = 1; k < coeffs.size(); ++k) {
        term = term * a;
        out += coeffs[k] * term;
    }
    return out;
}

/// exp(A) by scaling and squaring with a plain Taylor core.
inline MatrixXd expm_scaling_squaring(const MatrixXd& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }
    MatrixXd b = scale * a;
    MatrixXd term = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd out = term;
    for (int k = 1; k <= 24; ++k) {
        term = term * b / static_cast<double>(k);
        out += term;
    }
    for (int s = 0; s < squarings; ++s) out = out * out;
    return out;
}

/// sinh^2(x/2) Taylor in x, accurate to ~1e-14 for |x| <= 1:
/// sinh^2(x/2) = (cosh(x) - 1)/2 = sum_{k>=1} x^(2k) / (2 (2k)!).
inline MatrixXd sinh2_half_series(const MatrixXd& a) {
    std::vector<double> c(17, 0.0);
    double fact = 1.0;
    for (int k = 1; k <= 8; ++k) {
        fact *= (2.0 * k - 1.0) * (2.0 * k);
        c[2 * k] = 0.5 / fact;
    }
    return series_apply(a, c);
}

/// Christoffel symbols of a 2D conformal metric g = e^{2 phi} I from the
/// textbook closed form, with phi derivatives supplied by the caller.
/// gamma[k](i,j), phi_x = d phi / dx, phi_y = d phi / dy.
inline std::vector<MatrixXd> conformal2d_christoffel(double phi_x, double phi_y) {
    std::vector<MatrixXd> gamma(2, MatrixXd::Zero(2, 2));
    gamma[0](0, 0) = phi_x;
    gamma[0](0, 1) = phi_y;
    gamma[0](1, 0) = phi_y;
    gamma[0](1, 1) = -phi_x;
    gamma[1](0, 0) = -phi_y;
    gamma[1](0, 1) = phi_x;
    gamma[1](1, 0) = phi_x;
    gamma[1](1, 1) = phi_y;
    return gamma;
}

/// Constant-curvature model tensor: Riem(X,Y)Z = K (g(X,Z) Y - g(Y,Z) X)
/// for the sign convention Riem(X,Y) = grad_Y grad_X - grad_X grad_Y + grad_[X,Y].
/// Lowered: R_{ijkl} = K (g_ik g_jl - g_jk g_il).
inline mdc::Tensor4 constant_curvature_lowered(const MatrixXd& g, double K) {
    const int n = static_cast<int>(g.rows());
    mdc::Tensor4 t(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    t(i, j, k, l) = K * (g(i, k) * g(j, l) - g(j, k) * g(i, l));
    return t;
}

/// Pullback of the ambient Euclidean metric through the embedded sphere,
/// via numerical differentiation of the chart-to-R^3 map.
inline MatrixXd sphere_pullback_metric(double r, const VectorXd& p) {
    auto embed = [&](const VectorXd& q) {
        const double d = r * r + q.squaredNorm();
        Eigen::Vector3d x;
        x << 2.0 * r * r * q[0] / d, 2.0 * r * r * q[1] / d,
            r * (q.squaredNorm() - r * r) / d;
        return x;
    };
    const double h = 1e-6;
    Eigen::Matrix<double, 3, 2> jac;
    for (int k = 0; k < 2; ++k) {
        VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        jac.col(k) = (embed(pp) - embed(pm)) / (2.0 * h);
    }
    return jac.transpose() * jac;
}

/// Gaussian curvature of a graph z = f(x,y) at p from the second fundamental
/// form, all derivatives of f by finite differences.
template <typename F>
double graph_gauss_curvature_fd(F&& f, const VectorXd& p) {
    const double h = 1e-5;
    auto fxy = [&](double dx, double dy) {
        VectorXd q = p;
        q[0] += dx;
        q[1] += dy;
        return f(q);
    };
    const double fx = (fxy(h, 0) - fxy(-h, 0)) / (2 * h);
    const double fy = (fxy(0, h) - fxy(0, -h)) / (2 * h);
    const double fxx = (fxy(h, 0) - 2 * fxy(0, 0) + fxy(-h, 0)) / (h * h);
    const double fyy = (fxy(0, h) - 2 * fxy(0, 0) + fxy(0, -h)) / (h * h);
    const double fcross = (fxy(h, h) - fxy(h, -h) - fxy(-h, h) + fxy(-h, -h)) / (4 * h * h);
    const double w = 1.0 + fx * fx + fy * fy;
    return (fxx * fyy - fcross * fcross) / (w * w);
}

/// Parallel transport on the round sphere along a great circle, via the
/// embedding: coefficients in the moving (tangent, binormal) pair are
/// preserved.
struct SphereTransportOracle {
    double r;
    Eigen::Vector3d x0;    // start point in R^3
    Eigen::Vector3d that;  // unit tangent in R^3
    Eigen::Vector3d bin;   // unit binormal (x0 x that)/r

    SphereTransportOracle(double radius, const Eigen::Vector3d& x, const Eigen::Vector3d& t)
        : r(radius), x0(x), that(t.normalized()), bin(x.cross(t.normalized()) / radius) {}

    /// Transport w (tangent at x0) to arclength s along the great circle.
    Eigen::Vector3d transport(const Eigen::Vector3d& w, double s) const {
        const double a = w.dot(that);
        const double b = w.dot(bin);
        const double phase = s / r;
        const Eigen::Vector3d tangent_s =
            -std::sin(phase) * x0 / r + std::cos(phase) * that;
        return a * tangent_s + b * bin;
    }
    Eigen::Vector3d point(double s) const {
        const double phase = s / r;
        return std::cos(phase) * x0 + r * std::sin(phase) * that;
    }
};

} // namespace oracles
