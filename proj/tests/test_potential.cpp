#include "doctest.h"

#include <cmath>

#include "mdc/potential.hpp"
#include "support/oracles.hpp"

using namespace mdc;

namespace {

VectorXd vec2(double x, double y) {
    VectorXd v(2);
    v << x, y;
    return v;
}

} // namespace

TEST_CASE("potential parsing and analytic derivative consistency") {
    const auto eu = make_manifold("euclidean:2");
    auto rng = substream(61, "potfd");
    for (const auto& spec : {"quadratic:0.8", "coordinate:1:0.5", "cross:0,1:0.4",
                             "bump:0.1;-0.2,1.1,0.7"}) {
        const auto theta = parse_potential(spec, *eu);
        for (int t = 0; t < 8; ++t) {
            const VectorXd p = vec2(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
            const double h = 1e-5;
            const VectorXd grad = theta->partials(p);
            const MatrixXd hess = theta->partials2(p);
            for (int i = 0; i < 2; ++i) {
                VectorXd pp = p, pm = p;
                pp[i] += h;
                pm[i] -= h;
                CHECK(grad[i] ==
                      doctest::Approx((theta->value(pp) - theta->value(pm)) / (2 * h))
                          .epsilon(1e-5));
                const VectorXd dg = (theta->partials(pp) - theta->partials(pm)) / (2 * h);
                CHECK((hess.col(i) - dg).norm() <= 2e-6 * (1.0 + hess.norm()));
                if (theta->has_partials3()) {
                    const MatrixXd dh = (theta->partials2(pp) - theta->partials2(pm)) / (2 * h);
                    CHECK((theta->partials3(p)[i] - dh).norm() <= 2e-5 * (1.0 + dh.norm()));
                }
            }
        }
    }
    CHECK_THROWS_AS((void)parse_potential("nonsense:1", *eu), ConfigError);
}

TEST_CASE("bump potential respects torus wrap and compact support") {
    const auto torus = make_manifold("torus:2:6.2832,6.2832");
    const auto theta = parse_potential("bump:0;0,1.0,1.0", *torus);
    // value near the wrap seam equals value at the equivalent displacement
    CHECK(theta->value(vec2(6.2832 - 0.3, 0.0)) ==
          doctest::Approx(theta->value(vec2(0.3, 0.0))).epsilon(1e-12));
    CHECK(theta->value(vec2(0, 0)) == doctest::Approx(1.0));
    CHECK(theta->value(vec2(1.5, 0)) == 0.0);
    CHECK(theta->partials(vec2(1.5, 0)).norm() == 0.0);
}

TEST_CASE("covariant hessian of a quadratic on flat space is constant") {
    const auto eu = make_manifold("euclidean:3");
    const auto theta = parse_potential("quadratic:0.7", *eu);
    auto rng = substream(62, "hessflat");
    for (int t = 0; t < 5; ++t) {
        VectorXd p(3);
        for (int i = 0; i < 3; ++i) p[i] = rng.normal();
        const auto fh = hessian_of_potential(*eu, *theta, p);
        CHECK((fh.hessian - 0.7 * MatrixXd::Identity(3, 3)).norm() <= 1e-12);
    }
    // zero potential has zero hessian
    const auto zero = parse_potential("bump:0;0;0,1.0,0.0", *eu);
    const auto fh0 = hessian_of_potential(*eu, *zero, VectorXd::Zero(3));
    CHECK(fh0.hessian.norm() == 0.0);
}

TEST_CASE("frame hessian on the sphere matches a geodesic Taylor fit") {
    const auto sph = make_manifold("sphere2:1");
    const auto theta = parse_potential("bump:0;0,0.9,0.4", *sph);
    const VectorXd x = vec2(0.12, -0.07);
    const auto fh = hessian_of_potential(*sph, *theta, x);
    const MatrixXd g = sph->metric(x);

    auto rng = substream(63, "taylor");
    for (int t = 0; t < 6; ++t) {
        VectorXd u = vec2(rng.normal(), rng.normal());
        u /= g_norm(g, u);
        const double delta = 5e-4;
        const double fp = theta->value(sph->geodesic_closed(x, u, delta).point);
        const double fm = theta->value(sph->geodesic_closed(x, -u, delta).point);
        const double f0 = theta->value(x);
        const double quad_fd = (fp - 2 * f0 + fm) / (delta * delta);
        const VectorXd u_frame = fh.frame.transpose() * g * u;
        const double quad = u_frame.dot(fh.hessian * u_frame);
        CHECK(quad == doctest::Approx(quad_fd).epsilon(5e-4));
    }
}

TEST_CASE("scale_to_admissible: closed-form cases on flat space") {
    const auto eu = make_manifold("euclidean:2");
    const auto source = make_truncated_gaussian(eu, 0.5, 1.5);

    // convex quadratic is admissible at full scale: det J = (1 + t lambda)^n
    const auto up = scale_to_admissible(eu, parse_potential("quadratic:1", *eu), *source, 7);
    CHECK(up.scale == doctest::Approx(1.0));
    CHECK(up.admissibility.min_detJ == doctest::Approx(1.0).epsilon(1e-9));

    // concave quadratic needs lambda = 1/2: det J = (1 - t lambda)^n
    const auto down = scale_to_admissible(eu, parse_potential("quadratic:-1", *eu), *source, 7);
    CHECK(down.scale == doctest::Approx(0.5));
    CHECK(down.admissibility.min_detJ == doctest::Approx(0.25).epsilon(1e-9));

    // search correctness: a potential admissible at lambda stays admissible
    // at lambda/2 (same detJ closed form with halved curvature)
    const auto milder = scale_to_admissible(eu, parse_potential("quadratic:-0.5", *eu), *source, 7);
    CHECK(milder.scale == doctest::Approx(1.0));
}

TEST_CASE("scale_to_admissible on a sphere cap bump returns a usable scale") {
    const auto sph = make_manifold("sphere2:1");
    const auto source = make_uniform_cap(sph, 0.9);
    const auto theta = parse_potential("bump:0;0,0.8,1.0", *sph);
    const auto transport = scale_to_admissible(sph, theta, *source, 11);
    CHECK(transport.scale <= 1.0);
    CHECK(transport.scale >= 9.5e-7);
    CHECK(transport.admissibility.min_detJ > 1e-3);
    CHECK(transport.admissibility.probes == 256);
}

TEST_CASE("interpolate: fixed points and the linear flat map") {
    const auto eu = make_manifold("euclidean:2");
    PotentialTransport id;
    id.manifold = eu;
    id.theta = parse_potential("bump:0;0,1.0,0.0", *eu);
    id.scale = 1.0;
    const VectorXd x = vec2(0.3, -0.4);
    const auto tp0 = interpolate(id, x);
    CHECK((transport_point(tp0, 0.0) - x).norm() == 0.0);
    CHECK((transport_point(tp0, 1.0) - x).norm() == 0.0);

    PotentialTransport quad;
    quad.manifold = eu;
    quad.theta = parse_potential("quadratic:1", *eu);
    quad.scale = 1.0;
    const auto tp = interpolate(quad, x);
    CHECK((transport_point(tp, 0.5) - 1.5 * x).norm() <= 1e-10);
    CHECK((transport_point(tp, 1.0) - 2.0 * x).norm() <= 1e-10);
    CHECK_THROWS_AS((void)transport_point(tp, 0.12345), std::invalid_argument);
}

TEST_CASE("entropy_two_ways: identical estimators for trivial transport, 3-sigma gap otherwise") {
    const auto eu = make_manifold("euclidean:2");
    const auto source = make_truncated_gaussian(eu, 0.6, 1.8);

    // constant potential + uniform source: both estimators collapse to the
    // cap entropy with no sampling noise at all
    const auto flat_src = make_uniform_cap(eu, 1.2);
    PotentialTransport id;
    id.manifold = eu;
    id.theta = parse_potential("bump:0;0,1.0,0.0", *eu);
    id.scale = 1.0;
    const auto trivial = entropy_two_ways(id, *flat_src, 500, 1.0, 5);
    CHECK(std::abs(trivial.gap) <= 1e-10);
    CHECK(std::abs(trivial.h_direct - flat_src->entropy()) <= 1e-12);
    CHECK(trivial.max_trace_defect <= 1e-12);

    PotentialTransport quad;
    quad.manifold = eu;
    quad.theta = parse_potential("quadratic:1", *eu);
    quad.scale = 1.0;
    const auto res = entropy_two_ways(quad, *source, 4000, 1.0, 5, 2);
    CHECK(std::abs(res.gap) <= 3.0 * res.standard_error + 1e-9);
    CHECK(res.max_trace_defect <= 1e-7);
    // direct entropy of the pushforward through (1+t)x drops by n log 2
    CHECK(res.h_direct ==
          doctest::Approx(source->entropy() - 2.0 * std::log(2.0)).epsilon(0.05));
}

TEST_CASE("entropy_two_ways on a product keeps the factor-2 tensor block empty") {
    const auto prod = make_manifold("product:torus:1:6.2832|torus:1:6.2832");
    const auto src = parse_source("product:uniform-cap:1.0:3.1416|uniform-cap:1.0:3.1416", prod);
    const auto t = scale_to_admissible(
        prod, parse_potential("factor:0:bump:3.1416,1.0,0.6", *prod), *src, 23);
    auto rng = substream(17, "prodsample");
    for (int k = 0; k < 5; ++k) {
        const VectorXd x = src->sample(rng);
        const auto tp = interpolate(t, x);
        for (int node = 0; node <= tp.record.steps(); node += 50) {
            CHECK(std::abs(tp.path.H[node](1, 1)) <= 1e-12);
            CHECK(std::abs(tp.path.H[node](0, 1)) <= 1e-12);
        }
    }
    const auto res = entropy_two_ways(t, *src, 300, 1.0, 5);
    CHECK(std::abs(res.gap) <= 3.0 * res.standard_error + 1e-9);
}

TEST_CASE("time reversal: flat closed form and curved-residual bounds") {
    const auto eu = make_manifold("euclidean:2");
    PotentialTransport quad;
    quad.manifold = eu;
    quad.theta = parse_potential("quadratic:1", *eu);
    quad.scale = 1.0;
    const VectorXd x = vec2(0.25, -0.15);
    const auto tr = time_reversal_check(quad, x);
    CHECK((tr.h_forward + std::log(2.0) * MatrixXd::Identity(2, 2)).norm() <= 1e-9);
    CHECK((tr.h_backward - std::log(2.0) * MatrixXd::Identity(2, 2)).norm() <= 1e-9);
    CHECK(tr.residual <= 1e-9);
    CHECK(tr.inverse_defect <= 1e-12);

    // trivial transport: both tensors vanish
    PotentialTransport id;
    id.manifold = eu;
    id.theta = parse_potential("bump:0;0,1.0,0.0", *eu);
    id.scale = 1.0;
    const auto tr0 = time_reversal_check(id, x);
    CHECK(tr0.h_forward.norm() == 0.0);
    CHECK(tr0.h_backward.norm() == 0.0);

    // sphere cap transport
    const auto sph = make_manifold("sphere2:1");
    const auto source = make_uniform_cap(sph, 0.7);
    const auto theta = parse_potential("bump:0;0,0.8,0.8", *sph);
    const auto transport = scale_to_admissible(sph, theta, *source, 3);
    auto rng = substream(19, "trprobe");
    for (int k = 0; k < 10; ++k) {
        const VectorXd p = source->sample(rng);
        const auto rev = time_reversal_check(transport, p);
        CHECK(rev.residual <= 1e-5);
        CHECK(rev.inverse_defect <= 1e-6);
        CHECK(rev.interior_defect_max <= 1e-5);
    }
}

TEST_CASE("source measures: normalization and entropy closed forms") {
    const auto sph = make_manifold("sphere2:1");
    const double alpha = 2.0 * M_PI / 5.0;
    const auto cap = make_uniform_cap(sph, alpha);  // geodesic radius = angular radius on r=1
    const double vol = 2.0 * M_PI * (1.0 - std::cos(alpha));
    CHECK(cap->entropy() == doctest::Approx(-std::log(vol)).epsilon(1e-12));

    // samples live inside the cap and fill it (spot check the radius range)
    auto rng = substream(20, "capsample");
    double max_rho = 0.0;
    const double chart_radius = std::tan(0.5 * alpha);
    for (int i = 0; i < 2000; ++i) {
        const VectorXd p = cap->sample(rng);
        const double rho = p.norm();
        CHECK(rho <= chart_radius + 1e-12);
        max_rho = std::max(max_rho, rho);
    }
    CHECK(max_rho > 0.95 * chart_radius);

    // truncated gaussian in flat space: compare with the analytic radial law
    const auto eu = make_manifold("euclidean:2");
    const auto tg = make_truncated_gaussian(eu, 0.5, 1.25);
    const double z = 2.0 * M_PI * 0.25 * (1.0 - std::exp(-0.5 * 1.25 * 1.25 / 0.25));
    CHECK(std::exp(tg->log_density(VectorXd::Zero(2))) == doctest::Approx(1.0 / z).epsilon(1e-8));
}
