#pragma once

#include "mdc/geodesic.hpp"
#include "mdc/tolerances.hpp"

namespace mdc {

/// Matrix Jacobi field along a geodesic: Jdd + R_s J = 0, J(0) = I,
/// Jd(0) = hess0, expressed in the record's parallel frame.
struct JacobiPath {
    VectorXd times;
    std::vector<MatrixXd> J;
    std::vector<MatrixXd> Jdot;
    VectorXd detJ;
    double asymmetry_max = 0.0;  // worst ||U - U^T||_F / (1 + ||U||_F) before symmetrization
};

/// Time-indexed entropy tensor triple along one transport geodesic.
/// H(0) = 0, Hdot = -U, Hddot = U^2 + R (the second derivative is formed
/// algebraically, never by differencing H).
struct EntropyTensorPath {
    VectorXd times;
    std::vector<MatrixXd> U;
    std::vector<MatrixXd> H;
    std::vector<MatrixXd> Hdot;
    std::vector<MatrixXd> Hddot;
    std::vector<MatrixXd> R;
    VectorXd detJ;
    double speed = 0.0;

    int nodes() const { return static_cast<int>(times.size()); }
};

JacobiPath integrate_jacobi(const GeodesicRecord& record, const MatrixXd& hess0,
                            const Tolerances& tol = Tolerances::defaults());

/// Direct Riccati route Ud + U^2 + R = 0; independent of integrate_jacobi.
std::vector<MatrixXd> integrate_riccati(const GeodesicRecord& record, const MatrixXd& hess0,
                                        const Tolerances& tol = Tolerances::defaults());

EntropyTensorPath entropy_tensor_path(const GeodesicRecord& record, const MatrixXd& hess0,
                                      const Tolerances& tol = Tolerances::defaults());

/// |Tr H(t) + log det J(t)| maximized over nodes.
double trace_identity_defect(const EntropyTensorPath& path);

struct ConvexityVerdict {
    VectorXd min_eig_hddot;           // per node
    VectorXd min_eig_gap;             // lambda_min(Hddot - Hdot^2) per node
    double global_min_hddot = 0.0;
    double global_min_gap = 0.0;
    double global_min_gap_transverse = 0.0;  // restricted to directions normal to motion
    double exp_scan_min_second_difference = 0.0;
    bool matrix_convex = false;       // Hddot >= 0 at all nodes (relative Loewner slack)
    bool strong_convex = false;       // Hddot >= Hdot^2 at all nodes
    bool exp_concave = false;         // s -> exp(-<w, H_s w>) concave for frame directions
};

ConvexityVerdict convexity_verdict(const EntropyTensorPath& path, double tol);

} // namespace mdc
