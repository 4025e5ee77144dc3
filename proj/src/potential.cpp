#include "mdc/potential.hpp"

#include "mdc/parallel.hpp"

#include <cmath>
#include <sstream>

namespace mdc {

std::vector<MatrixXd> Potential::partials3(const VectorXd&) const {
    throw std::logic_error("potential '" + spec() + "' has no analytic third derivatives");
}

namespace {

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

double parse_real(const std::string& s, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + s + "' in '" + ctx + "'");
    }
}

VectorXd parse_vector(const std::string& s, int dim, const std::string& ctx) {
    const auto parts = split(s, ';');
    if (static_cast<int>(parts.size()) != dim)
        throw ConfigError("expected " + std::to_string(dim) + " components in '" + ctx + "'");
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = parse_real(parts[i], ctx);
    return v;
}

class QuadraticPotential final : public Potential {
public:
    QuadraticPotential(double a, int dim, std::string spec)
        : a_(a), dim_(dim), spec_(std::move(spec)) {}
    double value(const VectorXd& p) const override { return 0.5 * a_ * p.squaredNorm(); }
    VectorXd partials(const VectorXd& p) const override { return a_ * p; }
    MatrixXd partials2(const VectorXd&) const override {
        return a_ * MatrixXd::Identity(dim_, dim_);
    }
    bool has_partials3() const override { return true; }
    std::vector<MatrixXd> partials3(const VectorXd&) const override {
        return std::vector<MatrixXd>(dim_, MatrixXd::Zero(dim_, dim_));
    }
    const std::string& spec() const override { return spec_; }

private:
    double a_;
    int dim_;
    std::string spec_;
};

class CoordinatePotential final : public Potential {
public:
    CoordinatePotential(int axis, double amp, int dim, std::string spec)
        : axis_(axis), amp_(amp), dim_(dim), spec_(std::move(spec)) {}
    double value(const VectorXd& p) const override { return amp_ * p[axis_]; }
    VectorXd partials(const VectorXd&) const override {
        return amp_ * VectorXd::Unit(dim_, axis_);
    }
    MatrixXd partials2(const VectorXd&) const override { return MatrixXd::Zero(dim_, dim_); }
    bool has_partials3() const override { return true; }
    std::vector<MatrixXd> partials3(const VectorXd&) const override {
        return std::vector<MatrixXd>(dim_, MatrixXd::Zero(dim_, dim_));
    }
    const std::string& spec() const override { return spec_; }

private:
    int axis_;
    double amp_;
    int dim_;
    std::string spec_;
};

class CrossPotential final : public Potential {
public:
    CrossPotential(int i, int j, double amp, int dim, std::string spec)
        : i_(i), j_(j), amp_(amp), dim_(dim), spec_(std::move(spec)) {}
    double value(const VectorXd& p) const override { return amp_ * p[i_] * p[j_]; }
    VectorXd partials(const VectorXd& p) const override {
        VectorXd g = VectorXd::Zero(dim_);
        g[i_] += amp_ * p[j_];
        g[j_] += amp_ * p[i_];
        return g;
    }
    MatrixXd partials2(const VectorXd&) const override {
        MatrixXd h = MatrixXd::Zero(dim_, dim_);
        h(i_, j_) += amp_;
        h(j_, i_) += amp_;
        return h;
    }
    bool has_partials3() const override { return true; }
    std::vector<MatrixXd> partials3(const VectorXd&) const override {
        return std::vector<MatrixXd>(dim_, MatrixXd::Zero(dim_, dim_));
    }
    const std::string& spec() const override { return spec_; }

private:
    int i_, j_;
    double amp_;
    int dim_;
    std::string spec_;
};

/// amp * exp(1 - 1/(1 - |d|^2/R^2)) inside |d| < R, zero outside; d is the
/// wrap-aware displacement from the center.
class BumpPotential final : public Potential {
public:
    BumpPotential(ManifoldPtr m, VectorXd center, double radius, double amp, std::string spec)
        : m_(std::move(m)), center_(std::move(center)), radius_(radius), amp_(amp),
          spec_(std::move(spec)) {}

    double value(const VectorXd& p) const override {
        const VectorXd d = m_->displacement(center_, p);
        double b, b1, b2, b3;
        profile(d.squaredNorm(), b, b1, b2, b3);
        return amp_ * b;
    }
    VectorXd partials(const VectorXd& p) const override {
        const VectorXd d = m_->displacement(center_, p);
        double b, b1, b2, b3;
        profile(d.squaredNorm(), b, b1, b2, b3);
        return amp_ * 2.0 * b1 * d;
    }
    MatrixXd partials2(const VectorXd& p) const override {
        const int n = m_->dim();
        const VectorXd d = m_->displacement(center_, p);
        double b, b1, b2, b3;
        profile(d.squaredNorm(), b, b1, b2, b3);
        return amp_ * (4.0 * b2 * d * d.transpose() + 2.0 * b1 * MatrixXd::Identity(n, n));
    }
    bool has_partials3() const override { return true; }
    std::vector<MatrixXd> partials3(const VectorXd& p) const override {
        const int n = m_->dim();
        const VectorXd d = m_->displacement(center_, p);
        double b, b1, b2, b3;
        profile(d.squaredNorm(), b, b1, b2, b3);
        std::vector<MatrixXd> out(n, MatrixXd::Zero(n, n));
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double s = 8.0 * b3 * d[k] * d[i] * d[j];
                    if (j == k) s += 4.0 * b2 * d[i];
                    if (i == k) s += 4.0 * b2 * d[j];
                    if (i == j) s += 4.0 * b2 * d[k];
                    out[k](i, j) = amp_ * s;
                }
        return out;
    }
    const std::string& spec() const override { return spec_; }

private:
    /// B(s) = exp(1 - 1/(1 - s/R^2)) with d/ds derivatives; everything
    /// vanishes to all orders at the support boundary.
    void profile(double s, double& b, double& b1, double& b2, double& b3) const {
        const double r2 = radius_ * radius_;
        const double q = 1.0 - s / r2;
        if (q < 1e-3) {
            b = b1 = b2 = b3 = 0.0;
            return;
        }
        const double w = 1.0 / q;
        b = std::exp(1.0 - w);
        const double u1 = -w * w / r2;
        const double u2 = -2.0 * w * w * w / (r2 * r2);
        const double u3 = -6.0 * w * w * w * w / (r2 * r2 * r2);
        b1 = b * u1;
        b2 = b * (u1 * u1 + u2);
        b3 = b * (u1 * u1 * u1 + 3.0 * u1 * u2 + u3);
    }

    ManifoldPtr m_;
    VectorXd center_;
    double radius_;
    double amp_;
    std::string spec_;
};

class FactorPotential final : public Potential {
public:
    FactorPotential(PotentialPtr inner, int offset, int inner_dim, int dim, std::string spec)
        : inner_(std::move(inner)), offset_(offset), inner_dim_(inner_dim), dim_(dim),
          spec_(std::move(spec)) {}

    double value(const VectorXd& p) const override {
        return inner_->value(p.segment(offset_, inner_dim_));
    }
    VectorXd partials(const VectorXd& p) const override {
        VectorXd g = VectorXd::Zero(dim_);
        g.segment(offset_, inner_dim_) = inner_->partials(p.segment(offset_, inner_dim_));
        return g;
    }
    MatrixXd partials2(const VectorXd& p) const override {
        MatrixXd h = MatrixXd::Zero(dim_, dim_);
        h.block(offset_, offset_, inner_dim_, inner_dim_) =
            inner_->partials2(p.segment(offset_, inner_dim_));
        return h;
    }
    bool has_partials3() const override { return inner_->has_partials3(); }
    std::vector<MatrixXd> partials3(const VectorXd& p) const override {
        const auto in3 = inner_->partials3(p.segment(offset_, inner_dim_));
        std::vector<MatrixXd> out(dim_, MatrixXd::Zero(dim_, dim_));
        for (int k = 0; k < inner_dim_; ++k)
            out[offset_ + k].block(offset_, offset_, inner_dim_, inner_dim_) = in3[k];
        return out;
    }
    const std::string& spec() const override { return spec_; }

private:
    PotentialPtr inner_;
    int offset_, inner_dim_, dim_;
    std::string spec_;
};

PotentialPtr parse_potential_impl(const std::string& spec, const ManifoldPtr& m) {
    const int n = m->dim();
    const auto head = split(spec, ':');
    const std::string& kind = head[0];

    if (kind == "quadratic") {
        if (head.size() != 2) throw ConfigError("quadratic:a expected: " + spec);
        return std::make_shared<QuadraticPotential>(parse_real(head[1], spec), n, spec);
    }
    if (kind == "coordinate") {
        if (head.size() != 3) throw ConfigError("coordinate:i:amp expected: " + spec);
        const int axis = static_cast<int>(parse_real(head[1], spec));
        if (axis < 0 || axis >= n) throw ConfigError("coordinate axis out of range: " + spec);
        return std::make_shared<CoordinatePotential>(axis, parse_real(head[2], spec), n, spec);
    }
    if (kind == "cross") {
        if (head.size() != 3) throw ConfigError("cross:i,j:amp expected: " + spec);
        const auto ij = split(head[1], ',');
        if (ij.size() != 2) throw ConfigError("cross:i,j:amp expected: " + spec);
        const int i = static_cast<int>(parse_real(ij[0], spec));
        const int j = static_cast<int>(parse_real(ij[1], spec));
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw ConfigError("cross axes out of range: " + spec);
        return std::make_shared<CrossPotential>(i, j, parse_real(head[2], spec), n, spec);
    }
    if (kind == "bump") {
        if (head.size() != 2) throw ConfigError("bump:c1;...;cn,radius,amp expected: " + spec);
        const auto args = split(head[1], ',');
        if (args.size() != 3) throw ConfigError("bump:c1;...;cn,radius,amp expected: " + spec);
        const VectorXd center = parse_vector(args[0], n, spec);
        const double radius = parse_real(args[1], spec);
        if (radius <= 0.0) throw ConfigError("bump radius must be positive: " + spec);
        return std::make_shared<BumpPotential>(m, center, radius, parse_real(args[2], spec),
                                               spec);
    }
    if (kind == "factor") {
        if (head.size() < 3) throw ConfigError("factor:k:<potential> expected: " + spec);
        const int which = static_cast<int>(parse_real(head[1], spec));
        const auto factors = product_factors(*m);
        if (!factors.first)
            throw ConfigError("factor potentials need a product manifold: " + spec);
        if (which != 0 && which != 1)
            throw ConfigError("factor index must be 0 or 1: " + spec);
        const std::string inner_spec = spec.substr(spec.find(':', 7) + 1);
        const ManifoldPtr sub = which == 0 ? factors.first : factors.second;
        const int offset = which == 0 ? 0 : factors.first->dim();
        PotentialPtr inner = parse_potential_impl(inner_spec, sub);
        return std::make_shared<FactorPotential>(inner, offset, sub->dim(), n, spec);
    }
    throw ConfigError("unknown potential spec: " + spec);
}

} // namespace

PotentialPtr parse_potential(const std::string& spec, const Manifold& m) {
    return parse_potential_impl(spec, make_manifold(m.name()));
}

VectorXd riemannian_gradient(const Manifold& m, const Potential& theta, const VectorXd& p) {
    return m.metric(p).ldlt().solve(theta.partials(p));
}

MatrixXd covariant_hessian(const Manifold& m, const Potential& theta, const VectorXd& p) {
    const int n = m.dim();
    const VectorXd dth = theta.partials(p);
    const MatrixXd d2th = theta.partials2(p);
    const Christoffel gamma = christoffel_at(m, p);
    MatrixXd h = d2th;
    for (int k = 0; k < n; ++k) h -= dth[k] * gamma[k];
    return symmetrize(h);
}

FrameHessian hessian_of_potential(const Manifold& m, const Potential& theta, const VectorXd& p) {
    const VectorXd v = riemannian_gradient(m, theta, p);
    FrameHessian out;
    out.frame = orthonormal_frame(m, p, v);
    out.hessian = symmetrize(out.frame.transpose() * covariant_hessian(m, theta, p) * out.frame);
    return out;
}

// ---- source measures -------------------------------------------------------

namespace {

bool is_flat(const Manifold& m) {
    const std::string& id = m.name();
    return id.rfind("euclidean", 0) == 0 || id.rfind("torus", 0) == 0;
}

double volume_density(const Manifold& m, const VectorXd& p) {
    return std::sqrt(m.metric(p).determinant());
}

/// Uniform proposal in the chart ball of radius b around the center.
VectorXd propose_in_ball(Rng& rng, const VectorXd& center, double b, int n) {
    if (n == 1) {
        VectorXd p(1);
        p[0] = center[0] + rng.uniform(-b, b);
        return p;
    }
    VectorXd dir(n);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < n; ++i) dir[i] = rng.normal();
        norm2 = dir.squaredNorm();
    } while (norm2 < 1e-12);
    const double rho = b * std::pow(rng.uniform(), 1.0 / n);
    return center + (rho / std::sqrt(norm2)) * dir;
}

/// Conservative radial-scan bound for sqrt(det g) on the chart ball.
double density_bound(const Manifold& m, const VectorXd& center, double b) {
    double best = 0.0;
    for (int k = 0; k <= 32; ++k) {
        const double rho = b * k / 32.0;
        for (int d = 0; d < m.dim(); ++d) {
            for (const double sgn : {1.0, -1.0}) {
                VectorXd p = center;
                p[d] += sgn * rho;
                if (m.in_chart(p)) best = std::max(best, volume_density(m, p));
            }
        }
    }
    return 1.2 * best;
}

class UniformCap final : public SourceMeasure {
public:
    UniformCap(ManifoldPtr m, double radius, VectorXd center)
        : m_(std::move(m)), center_(std::move(center)) {
        const int n = m_->dim();
        if (center_.size() == 0) center_ = VectorXd::Zero(n);
        if (center_.size() != n) throw ConfigError("uniform-cap: center dimension mismatch");
        if (!is_flat(*m_) && center_.norm() > 0.0)
            throw ConfigError("uniform-cap on curved charts must center at the chart origin");
        const auto vol = m_->cap_volume(radius);
        if (!vol)
            throw ConfigError(m_->name() + ": no closed-form cap volume at radius " +
                              std::to_string(radius));
        volume_ = *vol;
        chart_radius_ = m_->cap_chart_radius(radius);
        bound_ = density_bound(*m_, center_, chart_radius_);
        std::ostringstream os;
        os << "uniform-cap:" << radius;
        spec_ = os.str();
    }
    const Manifold& manifold() const override { return *m_; }
    double log_density(const VectorXd& p) const override {
        const double rho = m_->displacement(center_, p).norm();
        if (rho > chart_radius_ + 1e-12) return -std::numeric_limits<double>::infinity();
        return -std::log(volume_);
    }
    double entropy() const override { return -std::log(volume_); }
    VectorXd sample(Rng& rng) const override {
        for (;;) {
            const VectorXd p = propose_in_ball(rng, center_, chart_radius_, m_->dim());
            if (!m_->in_chart(p)) continue;
            if (rng.uniform() * bound_ <= volume_density(*m_, p))
                return m_->canonical_point(p);
        }
    }
    const std::string& spec() const override { return spec_; }

private:
    ManifoldPtr m_;
    VectorXd center_;
    double volume_ = 0.0;
    double chart_radius_ = 0.0;
    double bound_ = 0.0;
    std::string spec_;
};

class TruncatedGaussian final : public SourceMeasure {
public:
    TruncatedGaussian(ManifoldPtr m, double sigma, double radius, VectorXd center)
        : m_(std::move(m)), sigma_(sigma), radius_(radius), center_(std::move(center)) {
        const int n = m_->dim();
        if (center_.size() == 0) center_ = VectorXd::Zero(n);
        if (center_.size() != n) throw ConfigError("tgauss: center dimension mismatch");
        if (!is_flat(*m_) && center_.norm() > 0.0)
            throw ConfigError("tgauss on curved charts must center at the chart origin");
        if (sigma_ <= 0.0 || radius_ <= 0.0) throw ConfigError("tgauss wants sigma, radius > 0");

        // radial Simpson quadrature: normalizer Z and second moment
        const int quad = 4000;  // intervals, even
        const double h = radius_ / quad;
        double z = 0.0, m2 = 0.0;
        for (int k = 0; k <= quad; ++k) {
            const double rho = k * h;
            const double wt = (k == 0 || k == quad) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            VectorXd p = center_;
            p[0] += rho;
            const double dens = is_flat(*m_) ? 1.0 : volume_density(*m_, p);
            const double shell = n == 1 ? 2.0 : surface_area(n) * std::pow(rho, n - 1);
            const double f = std::exp(-0.5 * rho * rho / (sigma_ * sigma_)) * dens * shell;
            z += wt * f;
            m2 += wt * f * rho * rho;
        }
        z *= h / 3.0;
        m2 *= h / 3.0;
        normalizer_ = z;
        entropy_ = -0.5 * (m2 / z) / (sigma_ * sigma_) - std::log(z);
        bound_ = density_bound(*m_, center_, radius_);
        std::ostringstream os;
        os << "tgauss:" << sigma_ << "," << radius_;
        spec_ = os.str();
    }
    const Manifold& manifold() const override { return *m_; }
    double log_density(const VectorXd& p) const override {
        const double rho = m_->displacement(center_, p).norm();
        if (rho > radius_ + 1e-12) return -std::numeric_limits<double>::infinity();
        return -0.5 * rho * rho / (sigma_ * sigma_) - std::log(normalizer_);
    }
    double entropy() const override { return entropy_; }
    VectorXd sample(Rng& rng) const override {
        for (;;) {
            const VectorXd p = propose_in_ball(rng, center_, radius_, m_->dim());
            if (!m_->in_chart(p)) continue;
            const double rho = m_->displacement(center_, p).norm();
            const double target = std::exp(-0.5 * rho * rho / (sigma_ * sigma_)) *
                                  (is_flat(*m_) ? 1.0 : volume_density(*m_, p));
            if (rng.uniform() * bound_ <= target) return m_->canonical_point(p);
        }
    }
    const std::string& spec() const override { return spec_; }

private:
    static double surface_area(int n) {
        return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
    }

    ManifoldPtr m_;
    double sigma_;
    double radius_;
    VectorXd center_;
    double normalizer_ = 0.0;
    double entropy_ = 0.0;
    double bound_ = 0.0;
    std::string spec_;
};

class ProductSource final : public SourceMeasure {
public:
    ProductSource(ManifoldPtr prod, SourcePtr a, SourcePtr b)
        : m_(std::move(prod)), a_(std::move(a)), b_(std::move(b)) {
        const auto factors = product_factors(*m_);
        if (!factors.first) throw ConfigError("product source needs a product manifold");
        na_ = factors.first->dim();
        spec_ = "product:" + a_->spec() + "|" + b_->spec();
    }
    const Manifold& manifold() const override { return *m_; }
    double log_density(const VectorXd& p) const override {
        return a_->log_density(p.head(na_)) + b_->log_density(p.tail(p.size() - na_));
    }
    double entropy() const override { return a_->entropy() + b_->entropy(); }
    VectorXd sample(Rng& rng) const override {
        const VectorXd xa = a_->sample(rng);
        const VectorXd xb = b_->sample(rng);
        VectorXd out(xa.size() + xb.size());
        out << xa, xb;
        return out;
    }
    const std::string& spec() const override { return spec_; }

private:
    ManifoldPtr m_;
    SourcePtr a_, b_;
    int na_ = 0;
    std::string spec_;
};

} // namespace

SourcePtr make_uniform_cap(ManifoldPtr m, double radius, VectorXd center) {
    return std::make_shared<UniformCap>(std::move(m), radius, std::move(center));
}

SourcePtr make_truncated_gaussian(ManifoldPtr m, double sigma, double radius, VectorXd center) {
    return std::make_shared<TruncatedGaussian>(std::move(m), sigma, radius, std::move(center));
}

SourcePtr make_product_source(ManifoldPtr product, SourcePtr first, SourcePtr second) {
    return std::make_shared<ProductSource>(std::move(product), std::move(first),
                                           std::move(second));
}

SourcePtr parse_source(const std::string& spec, const ManifoldPtr& m) {
    if (spec.rfind("product:", 0) == 0) {
        const auto factors = product_factors(*m);
        if (!factors.first)
            throw ConfigError("product source needs a product manifold: " + spec);
        const auto parts = split(spec.substr(8), '|');
        if (parts.size() != 2) throw ConfigError("product source wants two factors: " + spec);
        return make_product_source(m, parse_source(parts[0], factors.first),
                                   parse_source(parts[1], factors.second));
    }
    const auto head = split(spec, ':');
    if (head[0] == "uniform-cap") {
        if (head.size() < 2 || head.size() > 3)
            throw ConfigError("uniform-cap:radius[:c1;...;cn] expected: " + spec);
        VectorXd center;
        if (head.size() == 3) center = parse_vector(head[2], m->dim(), spec);
        return make_uniform_cap(m, parse_real(head[1], spec), center);
    }
    if (head[0] == "tgauss") {
        if (head.size() < 2 || head.size() > 3)
            throw ConfigError("tgauss:sigma,radius[:c1;...;cn] expected: " + spec);
        const auto args = split(head[1], ',');
        if (args.size() != 2) throw ConfigError("tgauss:sigma,radius expected: " + spec);
        VectorXd center;
        if (head.size() == 3) center = parse_vector(head[2], m->dim(), spec);
        return make_truncated_gaussian(m, parse_real(args[0], spec), parse_real(args[1], spec),
                                       center);
    }
    throw ConfigError("unknown source spec: " + spec);
}

// ---- admissibility ----------------------------------------------------------

namespace {

std::optional<double> probe_min_det(const ManifoldPtr& m, const Potential& theta, double lambda,
                                    const VectorXd& x, const AdmissibilityOptions& opts) {
    const MatrixXd g = m->metric(x);
    const VectorXd v = lambda * riemannian_gradient(*m, theta, x);
    if (g_norm(g, v) > m->injectivity_margin() * m->injectivity_radius(x)) return std::nullopt;
    try {
        GeodesicOptions gopts;
        gopts.steps = opts.geodesic_steps;
        const GeodesicRecord rec = geodesic_shoot(m, x, v, gopts);
        const MatrixXd hess0 = symmetrize(
            rec.frames[0].transpose() * (lambda * covariant_hessian(*m, theta, x)) *
            rec.frames[0]);
        const JacobiPath jac = integrate_jacobi(rec, hess0);
        const double mind = jac.detJ.minCoeff();
        if (mind <= opts.det_floor) return std::nullopt;
        return mind;
    } catch (const InadmissibleTransport&) {
        return std::nullopt;
    } catch (const ChartDomainError&) {
        return std::nullopt;
    }
}

} // namespace

PotentialTransport scale_to_admissible(const ManifoldPtr& m, const PotentialPtr& theta,
                                       const SourceMeasure& source, std::uint64_t seed,
                                       const AdmissibilityOptions& opts) {
    std::vector<VectorXd> probes(opts.probes);
    for (int i = 0; i < opts.probes; ++i) {
        auto rng = substream(seed, "admissibility", static_cast<std::uint64_t>(i));
        probes[i] = source.sample(rng);
    }
    for (double lambda = 1.0; lambda >= opts.min_scale; lambda *= 0.5) {
        double min_det = std::numeric_limits<double>::infinity();
        bool ok = true;
        for (const auto& x : probes) {
            const auto d = probe_min_det(m, *theta, lambda, x, opts);
            if (!d) {
                ok = false;
                break;
            }
            min_det = std::min(min_det, *d);
        }
        if (ok) {
            PotentialTransport t;
            t.manifold = m;
            t.theta = theta;
            t.scale = lambda;
            t.admissibility = {min_det, opts.probes, seed};
            return t;
        }
    }
    throw NoAdmissibleScale("no admissible scale above 2^-20 for potential '" + theta->spec() +
                            "' on " + m->name());
}

// ---- transport evaluation ----------------------------------------------------

TransportPath interpolate(const PotentialTransport& transport, const VectorXd& x, int steps) {
    const ManifoldPtr& m = transport.manifold;
    GeodesicOptions opts;
    opts.steps = steps;
    const VectorXd v = transport.velocity(x);
    TransportPath tp{geodesic_shoot(m, x, v, opts), {}};
    const MatrixXd hess0 = symmetrize(
        tp.record.frames[0].transpose() *
        (transport.scale * covariant_hessian(*m, *transport.theta, x)) * tp.record.frames[0]);
    tp.path = entropy_tensor_path(tp.record, hess0);
    return tp;
}

VectorXd transport_point(const TransportPath& tp, double t) {
    const int K = tp.record.steps();
    const double kf = t * K;
    const int k = static_cast<int>(std::lround(kf));
    if (k < 0 || k > K || std::abs(kf - k) > 1e-9 * K)
        throw std::invalid_argument("transport_point: t does not land on the grid");
    return tp.record.points[k];
}

namespace {

double kahan_mean(const std::vector<double>& v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(v.size());
}

} // namespace

EntropyTwoWays entropy_two_ways(const PotentialTransport& transport, const SourceMeasure& source,
                                int n_samples, double t, std::uint64_t seed, int workers,
                                int steps) {
    const int kt = static_cast<int>(std::lround(t * steps));
    if (std::abs(t * steps - kt) > 1e-9 * steps)
        throw std::invalid_argument("entropy_two_ways: t must land on the grid");

    std::vector<double> direct(n_samples), tensor(n_samples), defect(n_samples);
    parallel_for(static_cast<std::size_t>(n_samples), workers, [&](std::size_t i) {
        auto rng = substream(seed, "entropy_two_ways", i);
        const VectorXd x = source.sample(rng);
        const TransportPath tp = interpolate(transport, x, steps);
        const double logdet = std::log(tp.path.detJ[kt]);
        direct[i] = source.log_density(x) - logdet;
        tensor[i] = tp.path.H[kt].trace();
        defect[i] = std::abs(tensor[i] + logdet);
    });

    EntropyTwoWays out;
    out.samples = n_samples;
    out.h_direct = kahan_mean(direct);
    out.h_tensor = source.entropy() + kahan_mean(tensor);
    out.gap = out.h_direct - out.h_tensor;

    std::vector<double> diff(n_samples);
    for (int i = 0; i < n_samples; ++i) diff[i] = direct[i] - tensor[i];
    const double md = kahan_mean(diff);
    double var = 0.0;
    for (int i = 0; i < n_samples; ++i) var += (diff[i] - md) * (diff[i] - md);
    var /= std::max(1, n_samples - 1);
    out.standard_error = std::sqrt(var / n_samples);
    for (int i = 0; i < n_samples; ++i)
        out.max_trace_defect = std::max(out.max_trace_defect, defect[i]);
    return out;
}

TimeReversal time_reversal_check(const PotentialTransport& transport, const VectorXd& x,
                                 int steps) {
    const ManifoldPtr& m = transport.manifold;
    GeodesicOptions opts;
    opts.steps = steps;

    const VectorXd v = transport.velocity(x);
    const GeodesicRecord fwd = geodesic_shoot(m, x, v, opts);
    const MatrixXd hess0 = symmetrize(
        fwd.frames[0].transpose() *
        (transport.scale * covariant_hessian(*m, *transport.theta, x)) * fwd.frames[0]);
    const JacobiPath jfwd = integrate_jacobi(fwd, hess0);
    const EntropyTensorPath pfwd = entropy_tensor_path(fwd, hess0);

    // reversed geodesic carrying the negated transported frame; the reversed
    // initial Hessian is -U at the forward endpoint
    const VectorXd y = fwd.points.back();
    const VectorXd vb = -fwd.velocities.back();
    const MatrixXd frame_b = -fwd.frames.back();
    const GeodesicRecord back = geodesic_shoot_with_frame(m, y, vb, frame_b, opts);
    const MatrixXd hess_b = -pfwd.U.back();
    const JacobiPath jback = integrate_jacobi(back, hess_b);
    const EntropyTensorPath pback = entropy_tensor_path(back, hess_b);

    TimeReversal out;
    out.h_forward = pfwd.H.back();
    out.h_backward = pback.H.back();
    out.residual = (out.h_backward + out.h_forward).norm();
    const int K = fwd.steps();
    out.inverse_defect =
        (jback.J.back() * jfwd.J.back() - MatrixXd::Identity(m->dim(), m->dim())).norm();
    for (const double r : {0.25, 0.5, 0.75}) {
        const int k = static_cast<int>(std::lround(r * K));
        out.interior_defect_max = std::max(
            out.interior_defect_max, (jback.J[k] - jfwd.J[K - k] * jback.J[K]).norm());
    }
    return out;
}

} // namespace mdc
