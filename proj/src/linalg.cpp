#include "mdc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mdc {

namespace {

double offdiag_norm(const MatrixXd& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

} // namespace

SymEig sym_eig(const MatrixXd& a_in, const Tolerances& tol) {
    if (a_in.rows() != a_in.cols())
        throw std::invalid_argument("sym_eig: matrix not square");
    const int n = static_cast<int>(a_in.rows());
    MatrixXd a = symmetrize(a_in);
    MatrixXd v = MatrixXd::Identity(n, n);
    const double scale = std::max(a.norm(), 1e-300);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (offdiag_norm(a) <= tol.eig_offdiag * scale) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                // smaller-root tangent keeps rotations well conditioned
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i) > a(j, j); });

    SymEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (int k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        out.eigenvectors.col(k) = v.col(order[k]);
        // fix sign for determinism: largest-magnitude entry positive
        int imax = 0;
        out.eigenvectors.col(k).cwiseAbs().maxCoeff(&imax);
        if (out.eigenvectors(imax, k) < 0.0) out.eigenvectors.col(k) *= -1.0;
    }
    return out;
}

MatrixXd spectral_apply(const MatrixXd& a, const std::function<double(double)>& h) {
    const SymEig eig = sym_eig(a);
    const int n = static_cast<int>(a.rows());
    VectorXd hl(n);
    for (int i = 0; i < n; ++i) {
        const double y = h(eig.eigenvalues[i]);
        if (!std::isfinite(y))
            throw std::domain_error("spectral_apply: function not finite at eigenvalue " +
                                    std::to_string(eig.eigenvalues[i]));
        hl[i] = y;
    }
    return symmetrize(eig.eigenvectors * hl.asDiagonal() * eig.eigenvectors.transpose());
}

double spectral_norm(const MatrixXd& a) {
    const SymEig eig = sym_eig(a);
    return eig.eigenvalues.cwiseAbs().maxCoeff();
}

double min_eigenvalue(const MatrixXd& a) {
    const SymEig eig = sym_eig(a);
    return eig.eigenvalues[eig.eigenvalues.size() - 1];
}

LoewnerResult loewner_geq(const MatrixXd& a, const MatrixXd& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("loewner_geq: size mismatch");
    const MatrixXd d = symmetrize(a - b);
    const SymEig eig = sym_eig(d);
    const double lmin = eig.eigenvalues[eig.eigenvalues.size() - 1];
    const double lmax = eig.eigenvalues.cwiseAbs().maxCoeff();
    LoewnerResult r;
    r.witness = lmin;
    r.geq = lmin >= -tol * (1.0 + lmax);
    return r;
}

double schur_horn_floor(const MatrixXd& a) {
    const SymEig eig = sym_eig(a);
    double s = 0.0;
    for (int i = 0; i < eig.eigenvalues.size(); ++i) s += std::exp(-eig.eigenvalues[i]);
    return static_cast<double>(a.rows()) - s;
}

double basis_deficit(const MatrixXd& a, const MatrixXd& basis, double ortho_tol) {
    const int n = static_cast<int>(a.rows());
    if (basis.rows() != n || basis.cols() != n)
        throw std::invalid_argument("basis_deficit: basis size mismatch");
    const MatrixXd gram = basis.transpose() * basis;
    if ((gram - MatrixXd::Identity(n, n)).norm() > ortho_tol)
        throw std::invalid_argument("basis_deficit: basis not orthonormal");
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s += 1.0 - std::exp(-basis.col(i).dot(a * basis.col(i)));
    return s;
}

double concavity_scan(const std::vector<double>& values) {
    if (values.size() < 3)
        throw std::invalid_argument("concavity_scan: need at least 3 samples");
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < values.size(); ++i)
        m = std::min(m, values[i + 1] - 2.0 * values[i] + values[i - 1]);
    return m;
}

MatrixXd mat_exp_spectral(const MatrixXd& a) {
    return spectral_apply(a, [](double x) { return std::exp(x); });
}

MatrixXd mat_log_spectral(const MatrixXd& a) {
    return spectral_apply(a, [](double x) { return std::log(x); });
}

MatrixXd sinh2_half(const MatrixXd& a) {
    return spectral_apply(a, [](double x) {
        const double s = std::sinh(0.5 * x);
        return s * s;
    });
}

} // namespace mdc
