#include "doctest.h"

#include <cmath>

#include "mdc/linalg.hpp"
#include "mdc/rng.hpp"
#include "support/oracles.hpp"

using namespace mdc;

namespace {

MatrixXd rot2(double angle) {
    MatrixXd q(2, 2);
    q << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return q;
}

} // namespace

TEST_CASE("sym_eig reconstructs and keeps eigenvectors orthonormal") {
    auto rng = substream(41, "symeig");
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        const MatrixXd a = oracles::random_symmetric(rng, n, 3.0);
        const SymEig eig = sym_eig(a);
        const MatrixXd rec = eig.eigenvectors * eig.eigenvalues.asDiagonal() *
                             eig.eigenvectors.transpose();
        CHECK((a - rec).norm() <= 1e-10 * (1.0 + a.norm()));
        CHECK((eig.eigenvectors.transpose() * eig.eigenvectors - MatrixXd::Identity(n, n)).norm() <=
              1e-10);
        for (int i = 0; i + 1 < n; ++i) CHECK(eig.eigenvalues[i] >= eig.eigenvalues[i + 1]);
    }
}

TEST_CASE("spectral_apply basics") {
    CHECK((spectral_apply(MatrixXd::Zero(3, 3), [](double x) { return std::exp(x); }) -
           MatrixXd::Identity(3, 3)).norm() == doctest::Approx(0.0));

    MatrixXd d(2, 2);
    d << 1.0, 0.0, 0.0, -1.0;
    const MatrixXd ed = spectral_apply(d, [](double x) { return std::exp(x); });
    CHECK(ed(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    CHECK(ed(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(std::abs(ed(0, 1)) < 1e-14);

    // rotated diag(0.4, -0.2), sinh^2(x/2)... the series oracle takes the
    // full argument, so apply h(x) = sinh^2(x) against series in 2x.
    const MatrixXd q = rot2(0.7);
    MatrixXd l(2, 2);
    l << 0.4, 0.0, 0.0, -0.2;
    const MatrixXd a = q * l * q.transpose();
    const MatrixXd lhs = spectral_apply(a, [](double x) {
        const double s = std::sinh(x);
        return s * s;
    });
    const MatrixXd rhs = oracles::sinh2_half_series(2.0 * a);
    CHECK((lhs - rhs).norm() <= 1e-12);
}

TEST_CASE("spectral_apply commutes with its argument") {
    auto rng = substream(42, "commute");
    for (int trial = 0; trial < 50; ++trial) {
        const MatrixXd a = oracles::random_symmetric(rng, 4, 2.0);
        const MatrixXd f = spectral_apply(a, [](double x) { return std::tanh(x); });
        CHECK((f * a - a * f).norm() <= 1e-11 * (1.0 + a.norm()));
    }
}

TEST_CASE("spectral exp matches scaling-and-squaring up to norm 10") {
    auto rng = substream(43, "expm");
    for (int trial = 0; trial < 100; ++trial) {
        MatrixXd a = oracles::random_symmetric(rng, 3 + static_cast<int>(rng.below(3)), 1.0);
        a *= 10.0 / std::max(1.0, spectral_norm(a));
        const MatrixXd lhs = mat_exp_spectral(a);
        const MatrixXd rhs = oracles::expm_scaling_squaring(a);
        CHECK((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }
}

TEST_CASE("spectral log rejects nonpositive eigenvalues") {
    MatrixXd a(2, 2);
    a << 1.0, 0.0, 0.0, -0.5;
    CHECK_THROWS_AS((void)mat_log_spectral(a), std::domain_error);
}

TEST_CASE("loewner_geq examples and order axioms") {
    const double tol = 1e-9;
    auto r1 = loewner_geq(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), tol);
    CHECK(r1.geq);
    CHECK(r1.witness == doctest::Approx(1.0));

    MatrixXd a(2, 2);
    a << 1.0, 0.0, 0.0, -0.1;
    auto r2 = loewner_geq(a, MatrixXd::Zero(2, 2), tol);
    CHECK_FALSE(r2.geq);
    CHECK(r2.witness == doctest::Approx(-0.1));

    auto rng = substream(44, "loewner");
    for (int trial = 0; trial < 50; ++trial) {
        const MatrixXd x = oracles::random_symmetric(rng, 3, 1.0);
        CHECK(loewner_geq(x, x, tol).geq);  // reflexive
        const MatrixXd bump = oracles::random_symmetric(rng, 3, 0.3);
        const MatrixXd y = x + bump * bump.transpose();  // y >= x
        const MatrixXd z = y + MatrixXd::Identity(3, 3) * rng.uniform(0.0, 0.5);
        CHECK(loewner_geq(y, x, tol).geq);
        CHECK(loewner_geq(z, y, tol).geq);
        CHECK(loewner_geq(z, x, 2.0 * tol).geq);  // transitive within combined slack
        // antisymmetry up to tol: y >= x and x >= y forces near-equality
        if (loewner_geq(x, y, tol).geq)
            CHECK(spectral_norm(x - y) <= 10 * tol * (1.0 + spectral_norm(x)));
    }
}

TEST_CASE("schur_horn_floor examples") {
    CHECK(schur_horn_floor(MatrixXd::Zero(3, 3)) == doctest::Approx(0.0));

    MatrixXd d(2, 2);
    d << 0.7, 0.0, 0.0, -1.3;
    CHECK(schur_horn_floor(d) ==
          doctest::Approx(2.0 - std::exp(-0.7) - std::exp(1.3)).epsilon(1e-14));
    // eigenbasis attains the floor
    CHECK(basis_deficit(d, MatrixXd::Identity(2, 2)) ==
          doctest::Approx(schur_horn_floor(d)).epsilon(1e-14));
}

TEST_CASE("basis_deficit never undercuts the floor (random bases)") {
    auto rng = substream(45, "schurhorn");
    for (int mat = 0; mat < 20; ++mat) {
        const MatrixXd a = oracles::random_symmetric(rng, 4, 1.5);
        const double floor = schur_horn_floor(a);
        double best = std::numeric_limits<double>::infinity();
        for (int b = 0; b < 500; ++b) {
            const MatrixXd basis = oracles::random_orthonormal(rng, 4);
            const double v = basis_deficit(a, basis);
            CHECK(v >= floor - 1e-9);
            best = std::min(best, v);
        }
        const SymEig eig = sym_eig(a);
        CHECK(basis_deficit(a, eig.eigenvectors) == doctest::Approx(floor).epsilon(1e-12));
        // near-eigenbasis rotations shrink the gap
        MatrixXd gauss(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) gauss(i, j) = rng.normal();
        const MatrixXd skew = 5e-4 * (gauss - gauss.transpose());
        const MatrixXd nearly = eig.eigenvectors * oracles::expm_scaling_squaring(skew);
        CHECK(basis_deficit(a, nearly, 1e-6) - floor < best - floor + 1e-9);
    }
}

TEST_CASE("basis_deficit rejects a skewed basis") {
    MatrixXd skew(2, 2);
    skew << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS_AS((void)basis_deficit(MatrixXd::Zero(2, 2), skew), std::invalid_argument);
    CHECK(basis_deficit(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2)) ==
          doctest::Approx(0.0));
}

TEST_CASE("concavity_scan on known shapes") {
    const int n = 21;
    const double h = 0.1;
    std::vector<double> lin(n), para(n), conv(n);
    for (int i = 0; i < n; ++i) {
        const double t = i * h;
        lin[i] = 3.0 - 2.0 * t;
        para[i] = -t * t;
        conv[i] = std::exp(t * t);
    }
    CHECK(concavity_scan(lin) == doctest::Approx(0.0));
    CHECK(concavity_scan(para) == doctest::Approx(-2.0 * h * h));
    CHECK(concavity_scan(conv) > 0.0);
    CHECK_THROWS_AS((void)concavity_scan({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("scalar Jensen chain holds for random symmetric matrices") {
    auto rng = substream(46, "jensen");
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(4));
        const MatrixXd a = oracles::random_symmetric(rng, n, 2.0);
        const double tre = mat_exp_spectral(-a).trace();
        const double tra = a.trace();
        CHECK(tre / n >= std::exp(-tra / n) - 1e-12);
        // matching chain used by the bound comparisons
        CHECK(n - tre <= n * (1.0 - std::exp(-tra / n)) + 1e-9);
        CHECK(n * (1.0 - std::exp(-tra / n)) <= tra + 1e-9);
    }
}
