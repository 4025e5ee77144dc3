#pragma once

#include "mdc/manifold.hpp"

namespace mdc {

/// A discretized geodesic on [0,1] together with its parallel orthonormal
/// frame and the curvature matrices evaluated in that frame.
struct GeodesicRecord {
    ManifoldPtr manifold;
    VectorXd times;                     // s_0 = 0 ... s_K = 1
    std::vector<VectorXd> points;       // canonical chart coordinates
    std::vector<VectorXd> velocities;   // chart components
    std::vector<MatrixXd> frames;       // columns orthonormal under g, e1 || velocity
    std::vector<MatrixXd> curvature_R;  // R_s(a,b) = g(Riem(v, e_a) v, e_b)
    double speed = 0.0;
    int reorthonormalizations = 0;      // frame fixes triggered by drift
    double frame_drift_max = 0.0;

    int steps() const { return static_cast<int>(times.size()) - 1; }
};

struct GeodesicOptions {
    int steps = 200;              // even; raised automatically on failure
    double endpoint_tol = 1e-9;   // Richardson error target
    int max_escalations = 3;
    bool enforce_injectivity = true;
};

/// Integrate the geodesic from (p, v) over [0,1] (classical 4th-order scheme
/// on position/velocity, frame transported jointly). Throws
/// InadmissibleTransport when the shot exceeds the usable fraction of the
/// injectivity radius, ConvergenceError when step refinement fails.
GeodesicRecord geodesic_shoot(const ManifoldPtr& m, const VectorXd& p, const VectorXd& v,
                              const GeodesicOptions& opts = {});

/// Same, but transporting a caller-supplied initial frame (columns
/// orthonormal under g(p), first column along v when the speed is nonzero).
GeodesicRecord geodesic_shoot_with_frame(const ManifoldPtr& m, const VectorXd& p,
                                         const VectorXd& v, const MatrixXd& frame0,
                                         const GeodesicOptions& opts = {});

/// Transport an explicit initial frame along the geodesic from (p, v).
/// frame0 columns must be orthonormal under g(p).
std::vector<MatrixXd> parallel_frame(const Manifold& m, const VectorXd& p, const VectorXd& v,
                                     int steps, const MatrixXd& frame0);

} // namespace mdc
