#pragma once

#include <optional>

#include "mdc/jacobi.hpp"
#include "mdc/rng.hpp"

namespace mdc {

/// Smooth scalar field on a chart, with partial derivatives up to second
/// order everywhere and third order where available (used by the curvature
/// identity checks).
class Potential {
public:
    virtual ~Potential() = default;
    virtual double value(const VectorXd& p) const = 0;
    virtual VectorXd partials(const VectorXd& p) const = 0;        // d theta
    virtual MatrixXd partials2(const VectorXd& p) const = 0;       // d^2 theta
    virtual bool has_partials3() const { return false; }
    /// out[k](i,j) = d_k d_i d_j theta
    virtual std::vector<MatrixXd> partials3(const VectorXd& p) const;
    virtual const std::string& spec() const = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// Named analytic forms:
///   quadratic:a           theta = a |x|^2 / 2
///   coordinate:i:amp      theta = amp * x^i          (i zero-based)
///   bump:c1;...;cn,radius,amp   compactly supported mollifier bump
///   cross:i,j:amp         theta = amp * x^i x^j
///   factor:k:<inner>      inner form acting on factor k of a product chart
///   radial-linear:u1;...;un,amp  linear in normal coordinates at the chart
///                          origin (hyperbolic2 / sphere2 / flat charts)
PotentialPtr parse_potential(const std::string& spec, const Manifold& m);

/// Riemannian gradient in chart components.
VectorXd riemannian_gradient(const Manifold& m, const Potential& theta, const VectorXd& p);

/// Covariant Hessian as a (0,2) tensor in chart components.
MatrixXd covariant_hessian(const Manifold& m, const Potential& theta, const VectorXd& p);

/// Covariant Hessian expressed in the geodesic start frame at p (frame built
/// with first column along grad theta; returned alongside).
struct FrameHessian {
    MatrixXd frame;
    MatrixXd hessian;
};
FrameHessian hessian_of_potential(const Manifold& m, const Potential& theta, const VectorXd& p);

// ---- source measures -----------------------------------------------------

class SourceMeasure {
public:
    virtual ~SourceMeasure() = default;
    virtual const Manifold& manifold() const = 0;
    virtual double log_density(const VectorXd& p) const = 0;  // w.r.t. volume
    virtual double entropy() const = 0;
    virtual VectorXd sample(Rng& rng) const = 0;
    virtual const std::string& spec() const = 0;
};

using SourcePtr = std::shared_ptr<const SourceMeasure>;

/// Uniform on the chart ball |p - center| <= radius (wrap-aware on tori),
/// normalized against the volume measure. Curved catalog charts require
/// center = chart origin, where the cap volume is available in closed form.
SourcePtr make_uniform_cap(ManifoldPtr m, double radius, VectorXd center = {});

/// exp(-|p - center|^2 / (2 sigma^2)) truncated to the chart ball of the
/// given radius; same centering rules as make_uniform_cap.
SourcePtr make_truncated_gaussian(ManifoldPtr m, double sigma, double radius,
                                  VectorXd center = {});

SourcePtr make_product_source(ManifoldPtr product, SourcePtr first, SourcePtr second);

/// "uniform-cap:radius", "tgauss:sigma,radius", "product:<a>|<b>"
SourcePtr parse_source(const std::string& spec, const ManifoldPtr& m);

// ---- admissible transports -------------------------------------------------

struct AdmissibilityCert {
    double min_detJ = 0.0;
    int probes = 0;
    std::uint64_t seed = 0;
};

struct PotentialTransport {
    ManifoldPtr manifold;
    PotentialPtr theta;
    double scale = 1.0;  // lambda actually applied
    AdmissibilityCert admissibility;

    VectorXd velocity(const VectorXd& x) const {
        return scale * riemannian_gradient(*manifold, *theta, x);
    }
};

struct AdmissibilityOptions {
    int probes = 256;
    double det_floor = 1e-3;
    double min_scale = 9.5367431640625e-07;  // 2^-20
    int geodesic_steps = 200;
};

/// Largest lambda in {1, 1/2, 1/4, ...} such that every probe drawn from the
/// source keeps det J above the floor on [0,1] and the displacement inside
/// the injectivity budget. Throws NoAdmissibleScale below 2^-20.
PotentialTransport scale_to_admissible(const ManifoldPtr& m, const PotentialPtr& theta,
                                       const SourceMeasure& source, std::uint64_t seed,
                                       const AdmissibilityOptions& opts = {});

// ---- transport evaluation ---------------------------------------------------

struct TransportPath {
    GeodesicRecord record;
    EntropyTensorPath path;

    const VectorXd& point_at_node(int k) const { return record.points[k]; }
};

/// Geodesic + entropy tensor path of the displacement interpolation at x.
TransportPath interpolate(const PotentialTransport& transport, const VectorXd& x,
                          int steps = 200);

/// F_t(x) for t on the record grid (t*steps must land on a node).
VectorXd transport_point(const TransportPath& tp, double t);

struct EntropyTwoWays {
    double h_direct = 0.0;      // E log(rho_0 / det J_t) under mu_0
    double h_tensor = 0.0;      // H(mu_0) + E Tr H_t
    double gap = 0.0;
    double standard_error = 0.0;
    double max_trace_defect = 0.0;  // worst |Tr H_t + log det J_t| over samples
    int samples = 0;
};

EntropyTwoWays entropy_two_ways(const PotentialTransport& transport,
                                const SourceMeasure& source, int n_samples, double t,
                                std::uint64_t seed, int workers = 1, int steps = 200);

struct TimeReversal {
    MatrixXd h_forward;       // H_1 at x, forward frame
    MatrixXd h_backward;      // H_1 at F_1(x), reversed frame
    double residual = 0.0;    // ||H_back + H_fwd||_F
    double inverse_defect = 0.0;        // ||J_back(1) J_fwd(1) - I||_F
    double interior_defect_max = 0.0;   // ||J_back(r) - J_fwd(1-r) J_back(1)||_F
};

TimeReversal time_reversal_check(const PotentialTransport& transport, const VectorXd& x,
                                 int steps = 200);

} // namespace mdc
