#pragma once

#include <Eigen/Dense>
#include <functional>

#include "mdc/tolerances.hpp"

namespace mdc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending,
/// eigenvectors as orthonormal columns of V (A = V diag(lambda) V^T).
struct SymEig {
    VectorXd eigenvalues;
    MatrixXd eigenvectors;
};

/// Cyclic Jacobi rotations. Deterministic sweep order, intended for the
/// small (dim <= 16) symmetric matrices this toolkit works with.
SymEig sym_eig(const MatrixXd& a, const Tolerances& tol = Tolerances::defaults());

/// h(A) = V h(Lambda) V^T. Throws std::domain_error if h is not finite at
/// an eigenvalue (e.g. log of a nonpositive eigenvalue).
MatrixXd spectral_apply(const MatrixXd& a, const std::function<double(double)>& h);

double spectral_norm(const MatrixXd& a);
double min_eigenvalue(const MatrixXd& a);

struct LoewnerResult {
    bool geq = false;
    double witness = 0.0;  // smallest eigenvalue of A - B
};

/// A >= B in the Loewner order, up to lambda_min(A-B) >= -tol*(1+||A-B||_2).
LoewnerResult loewner_geq(const MatrixXd& a, const MatrixXd& b, double tol);

/// n - tr(exp(-A)): the exact infimum of basis_deficit over orthonormal bases.
double schur_horn_floor(const MatrixXd& a);

/// sum_i (1 - exp(-<e_i, A e_i>)) for an orthonormal basis given as columns.
/// Throws std::invalid_argument if the basis fails the orthonormality check.
double basis_deficit(const MatrixXd& a, const MatrixXd& basis,
                     double ortho_tol = 1e-8);

/// Minimum centered second difference of uniformly spaced samples.
/// Values are raw differences v[i+1] - 2 v[i] + v[i-1] (not divided by h^2).
double concavity_scan(const std::vector<double>& values);

inline MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

/// Principal matrix functions used throughout.
MatrixXd mat_exp_spectral(const MatrixXd& a);      // exp(A), A symmetric
MatrixXd mat_log_spectral(const MatrixXd& a);      // log(A), A symmetric positive definite
MatrixXd sinh2_half(const MatrixXd& a);            // sinh^2(A/2), A symmetric

} // namespace mdc
