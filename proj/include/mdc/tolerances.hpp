#pragma once

namespace mdc {

/// One record holding every numerical tolerance used across the toolkit.
/// Values are the calibrated defaults; the "strict" profile tightens the
/// purely algebraic ones and leaves statistical slack untouched.
struct Tolerances {
    // linear algebra
    double eig_offdiag = 1e-14;        // Jacobi sweep convergence, relative to ||A||_F
    double eig_reconstruct = 1e-10;    // ||A - V L V^T||_F / (1 + ||A||_F)
    double loewner = 1e-9;             // relative PSD slack in Loewner comparisons
    double orthonormal_basis = 1e-8;   // Gram defect accepted for a supplied basis

    // geometry
    double frame_gram = 1e-8;          // frame orthonormality per node
    double speed_drift = 1e-8;         // relative geodesic speed drift
    double curvature_symmetry = 1e-7;  // lowered Riemann tensor symmetry defect
    double sectional_invariance = 1e-8;
    double closed_form_match = 1e-6;   // numeric vs closed-form geodesic endpoints

    // Jacobi / Riccati transport
    double riccati_cross_check = 1e-6; // ||Jdot J^-1 - U||_F / (1 + ||U||_F)
    double trace_identity = 1e-7;      // |Tr H + log det J|
    double u_symmetry = 1e-7;          // relative asymmetry of U
    double riccati_norm_cap = 1e6;     // ||U||_2 blow-up guard
    double det_admissible = 1e-3;      // probe floor for det J on [0,1]

    // transports and measures
    double mass_normalization = 1e-9;
    double time_reversal_residual = 1e-5;
    double jacobi_inverse_check = 1e-6;
    double sinkhorn_marginal = 1e-6;

    // statistics
    double se_multiplier = 3.0;        // slack = se_multiplier * SE + eps bias
    double algebraic = 1e-9;           // slack for exact inequality chains

    static Tolerances defaults() { return {}; }

    static Tolerances strict() {
        Tolerances t;
        t.loewner = 1e-10;
        t.algebraic = 1e-10;
        t.curvature_symmetry = 1e-8;
        return t;
    }
};

} // namespace mdc
