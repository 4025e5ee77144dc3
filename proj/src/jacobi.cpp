#include "mdc/jacobi.hpp"

#include <cmath>
#include <sstream>

namespace mdc {

namespace {

/// Cubic interpolation of the node-sampled curvature at the midpoint of
/// [k, k+1]; keeps the 4th-order accuracy of the integrator.
MatrixXd midpoint_R(const std::vector<MatrixXd>& r, int k) {
    const int last = static_cast<int>(r.size()) - 1;
    if (k >= 1 && k + 2 <= last)
        return (-r[k - 1] + 9.0 * r[k] + 9.0 * r[k + 1] - r[k + 2]) / 16.0;
    if (k == 0 && last >= 3)
        return (5.0 * r[0] + 15.0 * r[1] - 5.0 * r[2] + r[3]) / 16.0;
    if (k + 1 == last && last >= 3)
        return (r[last - 3] - 5.0 * r[last - 2] + 15.0 * r[last - 1] + 5.0 * r[last]) / 16.0;
    return 0.5 * (r[k] + r[k + 1]);
}

void check_square(const GeodesicRecord& record, const MatrixXd& hess0, const char* who) {
    const int n = record.manifold->dim();
    if (hess0.rows() != n || hess0.cols() != n)
        throw std::invalid_argument(std::string(who) + ": hess0 has wrong size");
    if (record.curvature_R.size() != record.points.size())
        throw std::invalid_argument(std::string(who) + ": record lacks curvature matrices");
}

} // namespace

JacobiPath integrate_jacobi(const GeodesicRecord& record, const MatrixXd& hess0,
                            const Tolerances& tol) {
    check_square(record, hess0, "integrate_jacobi");
    const int n = record.manifold->dim();
    const int K = record.steps();
    const double h = 1.0 / K;
    const auto& R = record.curvature_R;

    JacobiPath path;
    path.times = record.times;
    path.J.resize(K + 1);
    path.Jdot.resize(K + 1);
    path.detJ.resize(K + 1);

    MatrixXd J = MatrixXd::Identity(n, n);
    MatrixXd Jd = symmetrize(hess0);
    path.J[0] = J;
    path.Jdot[0] = Jd;
    path.detJ[0] = 1.0;

    for (int k = 0; k < K; ++k) {
        const MatrixXd& R0 = R[k];
        const MatrixXd Rm = midpoint_R(R, k);
        const MatrixXd& R1 = R[k + 1];

        const MatrixXd k1J = Jd;
        const MatrixXd k1D = -R0 * J;
        const MatrixXd k2J = Jd + 0.5 * h * k1D;
        const MatrixXd k2D = -Rm * (J + 0.5 * h * k1J);
        const MatrixXd k3J = Jd + 0.5 * h * k2D;
        const MatrixXd k3D = -Rm * (J + 0.5 * h * k2J);
        const MatrixXd k4J = Jd + h * k3D;
        const MatrixXd k4D = -R1 * (J + h * k3J);

        J += (h / 6.0) * (k1J + 2.0 * k2J + 2.0 * k3J + k4J);
        Jd += (h / 6.0) * (k1D + 2.0 * k2D + 2.0 * k3D + k4D);

        path.J[k + 1] = J;
        path.Jdot[k + 1] = Jd;
        const double det = J.determinant();
        path.detJ[k + 1] = det;
        if (det <= 0.0) {
            std::ostringstream os;
            os << "det J = " << det << " at s = " << record.times[k + 1]
               << " (conjugate point or transport too strong)";
            throw InadmissibleTransport(os.str());
        }
        const MatrixXd u = Jd * J.inverse();
        path.asymmetry_max = std::max(
            path.asymmetry_max, (u - u.transpose()).norm() / (1.0 + u.norm()));
        if (spectral_norm(symmetrize(u)) > tol.riccati_norm_cap)
            throw InadmissibleTransport("Riccati flow exceeded norm cap");
    }
    return path;
}

std::vector<MatrixXd> integrate_riccati(const GeodesicRecord& record, const MatrixXd& hess0,
                                        const Tolerances& tol) {
    check_square(record, hess0, "integrate_riccati");
    const int K = record.steps();
    const double h = 1.0 / K;
    const auto& R = record.curvature_R;

    std::vector<MatrixXd> out(K + 1);
    MatrixXd U = symmetrize(hess0);
    out[0] = U;
    for (int k = 0; k < K; ++k) {
        const MatrixXd& R0 = R[k];
        const MatrixXd Rm = midpoint_R(R, k);
        const MatrixXd& R1 = R[k + 1];

        const MatrixXd k1 = -(U * U) - R0;
        const MatrixXd u2 = U + 0.5 * h * k1;
        const MatrixXd k2 = -(u2 * u2) - Rm;
        const MatrixXd u3 = U + 0.5 * h * k2;
        const MatrixXd k3 = -(u3 * u3) - Rm;
        const MatrixXd u4 = U + h * k3;
        const MatrixXd k4 = -(u4 * u4) - R1;

        U += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        U = symmetrize(U);
        if (!U.allFinite() || spectral_norm(U) > tol.riccati_norm_cap)
            throw InadmissibleTransport("Riccati flow blew up");
        out[k + 1] = U;
    }
    return out;
}

EntropyTensorPath entropy_tensor_path(const GeodesicRecord& record, const MatrixXd& hess0,
                                      const Tolerances& tol) {
    const JacobiPath jac = integrate_jacobi(record, hess0, tol);
    const int n = record.manifold->dim();
    const int K = record.steps();
    const double h = 1.0 / K;

    EntropyTensorPath path;
    path.times = record.times;
    path.detJ = jac.detJ;
    path.speed = record.speed;
    path.U.resize(K + 1);
    path.H.resize(K + 1);
    path.Hdot.resize(K + 1);
    path.Hddot.resize(K + 1);
    path.R = record.curvature_R;

    for (int k = 0; k <= K; ++k)
        path.U[k] = symmetrize(jac.Jdot[k] * jac.J[k].inverse());

    // H = -int U ds by cumulative composite Simpson; odd nodes use the
    // half-interval cubic rule so every node carries a 4th-order value.
    path.H[0] = MatrixXd::Zero(n, n);
    for (int k = 2; k <= K; k += 2)
        path.H[k] = path.H[k - 2] -
                    (h / 3.0) * (path.U[k - 2] + 4.0 * path.U[k - 1] + path.U[k]);
    for (int k = 1; k <= K; k += 2) {
        if (k + 1 <= K)
            path.H[k] = path.H[k - 1] -
                        (h / 12.0) * (5.0 * path.U[k - 1] + 8.0 * path.U[k] - path.U[k + 1]);
        else
            path.H[k] = path.H[k - 1] -
                        (h / 12.0) * (-path.U[k - 2] + 8.0 * path.U[k - 1] + 5.0 * path.U[k]);
    }
    for (int k = 0; k <= K; ++k) {
        path.H[k] = symmetrize(path.H[k]);
        path.Hdot[k] = -path.U[k];
        path.Hddot[k] = symmetrize(path.U[k] * path.U[k] + path.R[k]);
    }
    return path;
}

double trace_identity_defect(const EntropyTensorPath& path) {
    double worst = 0.0;
    for (int k = 0; k < path.nodes(); ++k)
        worst = std::max(worst, std::abs(path.H[k].trace() + std::log(path.detJ[k])));
    return worst;
}

ConvexityVerdict convexity_verdict(const EntropyTensorPath& path, double tol) {
    const int K = path.nodes();
    const int n = static_cast<int>(path.H[0].rows());
    ConvexityVerdict v;
    v.min_eig_hddot.resize(K);
    v.min_eig_gap.resize(K);
    v.global_min_hddot = std::numeric_limits<double>::infinity();
    v.global_min_gap = std::numeric_limits<double>::infinity();
    v.global_min_gap_transverse = std::numeric_limits<double>::infinity();
    v.matrix_convex = true;
    v.strong_convex = true;

    for (int k = 0; k < K; ++k) {
        const MatrixXd gap = symmetrize(path.Hddot[k] - path.Hdot[k] * path.Hdot[k]);
        v.min_eig_hddot[k] = min_eigenvalue(path.Hddot[k]);
        v.min_eig_gap[k] = min_eigenvalue(gap);
        v.global_min_hddot = std::min(v.global_min_hddot, v.min_eig_hddot[k]);
        v.global_min_gap = std::min(v.global_min_gap, v.min_eig_gap[k]);
        if (n >= 2 && path.speed > 0.0) {
            const MatrixXd trans = gap.bottomRightCorner(n - 1, n - 1);
            v.global_min_gap_transverse =
                std::min(v.global_min_gap_transverse, min_eigenvalue(trans));
        } else {
            v.global_min_gap_transverse = std::min(v.global_min_gap_transverse, v.min_eig_gap[k]);
        }
        if (v.min_eig_hddot[k] < -tol * (1.0 + spectral_norm(path.Hddot[k])))
            v.matrix_convex = false;
        if (v.min_eig_gap[k] < -tol * (1.0 + spectral_norm(gap)))
            v.strong_convex = false;
    }

    // concavity of s -> exp(-<w, H_s w>) checked on frame directions; the
    // scan reports the min second difference, so concavity of c is the scan
    // of -c staying above the noise floor.
    const double step = path.times[1] - path.times[0];
    double min2 = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (int d = 0; d < n; ++d) {
        std::vector<double> neg_c(K);
        for (int k = 0; k < K; ++k) {
            neg_c[k] = -std::exp(-path.H[k](d, d));
            scale = std::max(scale, std::abs(neg_c[k]));
        }
        min2 = std::min(min2, concavity_scan(neg_c));
    }
    v.exp_scan_min_second_difference = min2;
    v.exp_concave = min2 >= -1e-6 * step * step * scale - tol;
    return v;
}

} // namespace mdc
