#include "mdc/geodesic.hpp"

#include <cmath>
#include <sstream>

namespace mdc {

namespace {

struct FlowState {
    VectorXd p;
    VectorXd v;
    MatrixXd e;  // frame columns in chart components

    FlowState operator+(const FlowState& o) const { return {p + o.p, v + o.v, e + o.e}; }
    FlowState operator*(double a) const { return {a * p, a * v, a * e}; }
};

/// w^k = Gamma^k_{ij} a^i b^j
VectorXd contract_gamma(const Christoffel& gamma, const VectorXd& a, const VectorXd& b) {
    const int n = static_cast<int>(gamma.size());
    VectorXd w(n);
    for (int k = 0; k < n; ++k) w[k] = a.dot(gamma[k] * b);
    return w;
}

FlowState rhs(const Manifold& m, const FlowState& y) {
    const Christoffel gamma = christoffel_at(m, y.p);
    FlowState d;
    d.p = y.v;
    d.v = -contract_gamma(gamma, y.v, y.v);
    d.e.resize(y.e.rows(), y.e.cols());
    for (int c = 0; c < y.e.cols(); ++c)
        d.e.col(c) = -contract_gamma(gamma, y.v, y.e.col(c));
    return d;
}

FlowState rk4_step(const Manifold& m, const FlowState& y, double h) {
    const FlowState k1 = rhs(m, y);
    const FlowState k2 = rhs(m, y + k1 * (h / 2.0));
    const FlowState k3 = rhs(m, y + k2 * (h / 2.0));
    const FlowState k4 = rhs(m, y + k3 * h);
    return y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

/// Gram-Schmidt under g, preserving column order.
void reorthonormalize(const MatrixXd& g, MatrixXd& e) {
    for (int c = 0; c < e.cols(); ++c) {
        VectorXd w = e.col(c);
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < c; ++j)
                w -= g_inner(g, e.col(j), w) * e.col(j);
        e.col(c) = w / g_norm(g, w);
    }
}

double gram_defect(const MatrixXd& g, const MatrixXd& e) {
    const MatrixXd gram = e.transpose() * g * e;
    return (gram - MatrixXd::Identity(e.rows(), e.cols())).norm();
}

struct IntegrationResult {
    std::vector<VectorXd> points;
    std::vector<VectorXd> velocities;
    std::vector<MatrixXd> frames;
    int reorthonormalizations = 0;
    double drift_max = 0.0;
};

IntegrationResult integrate(const Manifold& m, const VectorXd& p, const VectorXd& v,
                            const MatrixXd& frame0, int steps, bool record_nodes) {
    const double h = 1.0 / steps;
    FlowState y{p, v, frame0};
    IntegrationResult out;
    if (record_nodes) {
        out.points.reserve(steps + 1);
        out.velocities.reserve(steps + 1);
        out.frames.reserve(steps + 1);
        out.points.push_back(p);
        out.velocities.push_back(v);
        out.frames.push_back(frame0);
    }
    for (int k = 1; k <= steps; ++k) {
        y = rk4_step(m, y, h);
        if (!m.in_chart(y.p)) {
            std::ostringstream os;
            os << m.name() << ": geodesic left the chart at s = " << k * h;
            throw ChartDomainError(os.str());
        }
        if (k % 25 == 0 || k == steps) {
            const MatrixXd g = m.metric(y.p);
            const double defect = gram_defect(g, y.e);
            out.drift_max = std::max(out.drift_max, defect);
            if (defect > 0.1)
                throw ConvergenceError(m.name() + ": parallel frame lost orthonormality");
            if (defect > 1e-5) ++out.reorthonormalizations;
            reorthonormalize(g, y.e);
        }
        if (record_nodes) {
            out.points.push_back(y.p);
            out.velocities.push_back(y.v);
            out.frames.push_back(y.e);
        }
    }
    if (!record_nodes) {
        out.points.push_back(y.p);
        out.velocities.push_back(y.v);
        out.frames.push_back(y.e);
    }
    return out;
}

MatrixXd frame_curvature(const Manifold& m, const VectorXd& p, const VectorXd& v,
                         const MatrixXd& frame) {
    const int n = m.dim();
    const Tensor4 r = curvature_tensor(m, p);
    MatrixXd rs = MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l)
                            s += r(i, j, k, l) * v[i] * frame(j, a) * v[k] * frame(l, b);
            rs(a, b) = s;
            rs(b, a) = s;
        }
    return rs;
}

} // namespace

GeodesicRecord geodesic_shoot(const ManifoldPtr& m, const VectorXd& p, const VectorXd& v,
                              const GeodesicOptions& opts) {
    return geodesic_shoot_with_frame(m, p, v, orthonormal_frame(*m, p, v), opts);
}

GeodesicRecord geodesic_shoot_with_frame(const ManifoldPtr& m, const VectorXd& p,
                                         const VectorXd& v, const MatrixXd& frame0,
                                         const GeodesicOptions& opts) {
    m->check_chart(p);
    const MatrixXd g0 = m->metric(p);
    const double speed = g_norm(g0, v);
    if (gram_defect(g0, frame0) > 1e-8)
        throw std::invalid_argument(m->name() + ": initial frame not orthonormal under g");

    if (opts.enforce_injectivity) {
        const double budget = m->injectivity_margin() * m->injectivity_radius(p);
        if (speed > budget) {
            std::ostringstream os;
            os << m->name() << ": geodesic length " << speed
               << " exceeds injectivity budget " << budget;
            throw InadmissibleTransport(os.str());
        }
    }

    int steps = std::max(2, opts.steps);
    if (steps % 2 != 0) ++steps;
    for (int attempt = 0; ; ++attempt) {
        const IntegrationResult fine = integrate(*m, p, v, frame0, steps, true);
        const IntegrationResult coarse = integrate(*m, p, v, frame0, steps / 2, false);
        const double err = (fine.points.back() - coarse.points.back()).norm() / 15.0;
        if (err <= opts.endpoint_tol * (1.0 + speed) || attempt >= opts.max_escalations) {
            if (err > opts.endpoint_tol * (1.0 + speed)) {
                std::ostringstream os;
                os << m->name() << ": geodesic integration error " << err
                   << " after " << steps << " steps";
                throw ConvergenceError(os.str());
            }
            GeodesicRecord rec;
            rec.manifold = m;
            rec.times = VectorXd::LinSpaced(steps + 1, 0.0, 1.0);
            rec.points.resize(steps + 1);
            rec.velocities = fine.velocities;
            rec.frames = fine.frames;
            rec.curvature_R.resize(steps + 1);
            rec.speed = speed;
            rec.reorthonormalizations = fine.reorthonormalizations;
            rec.frame_drift_max = fine.drift_max;
            for (int k = 0; k <= steps; ++k) {
                rec.points[k] = m->canonical_point(fine.points[k]);
                rec.curvature_R[k] =
                    frame_curvature(*m, fine.points[k], fine.velocities[k], fine.frames[k]);
            }
            return rec;
        }
        steps *= 2;
    }
}

std::vector<MatrixXd> parallel_frame(const Manifold& m, const VectorXd& p, const VectorXd& v,
                                     int steps, const MatrixXd& frame0) {
    const MatrixXd g0 = m.metric(p);
    if (gram_defect(g0, frame0) > 1e-8)
        throw std::invalid_argument(m.name() + ": initial frame not orthonormal under g");
    const IntegrationResult res = integrate(m, p, v, frame0, steps, true);
    return res.frames;
}

} // namespace mdc
