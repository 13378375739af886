// Intermittent building blocks: profile normalization, shear flow structure,
// temporal cutoffs, and the fitted scaling exponents.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tmhd/building_blocks.hpp"
#include "tmhd/quadrature.hpp"
#include "tmhd/spectral_ops.hpp"

using namespace tmhd;

TEST_CASE("profile pair normalization and derivative structure") {
    ProfilePair p = make_profiles(1 << 14);

    double l2 = integrate([&](double x) { return p.phi(x) * p.phi(x); }, -1.0, 1.0, 128, 16);
    CHECK(l2 / kTwoPi == doctest::Approx(1.0).epsilon(1e-8));

    double mass = integrate([&](double x) { return p.phi(x); }, -1.0, 1.0, 128, 16);
    CHECK(std::abs(mass) < 1e-10);

    // phi = -Phi'' against finite differences of Phi
    double worst = 0;
    const int res = 1 << 14;
    for (int i = 4; i < res - 3; ++i) {
        double x = -1.0 + 2.0 * double(i) / res;
        double h = 2.0 / res;
        double fd = -(-p.Phi(x + 2 * h) + 16 * p.Phi(x + h) - 30 * p.Phi(x) + 16 * p.Phi(x - h) -
                      p.Phi(x - 2 * h)) /
                    (12 * h * h);
        worst = std::max(worst, std::abs(fd - p.phi(x)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("strict ladder validation") {
    StrictLadder l;
    l.a = 1e40;
    l.b = 2000000;
    l.eps = Fraction(1, 100);
    l.alpha = Fraction(1);
    l.beta = 5.0 / (2.0 * double(l.b) * double(l.b));
    l.gamma_lps = 1.0;
    l.p_lps = 1e9;
    l.s_lps = 0.0;
    // b eps = 20000 integer, b(2 - 2 - 10/100) = -200000... must be integer; it is
    CHECK_NOTHROW(validate_strict_ladder(l));
    SUBCASE("toy-scale a fails with the admissibility message") {
        StrictLadder bad = l;
        bad.a = 4;
        CHECK_THROWS_WITH_AS(validate_strict_ladder(bad),
                             doctest::Contains("a >= (85*8*80 r L^2)^c"), std::invalid_argument);
    }
    SUBCASE("odd b fails") {
        StrictLadder bad = l;
        bad.b = 2000001;
        CHECK_THROWS(validate_strict_ladder(bad));
    }
    SUBCASE("non-integral b eps fails") {
        StrictLadder bad = l;
        bad.eps = Fraction(1, 3000001);
        bad.b = 2000000;  // b eps not integral
        CHECK_THROWS(validate_strict_ladder(bad));
    }
    SUBCASE("log lambda ladder grows") {
        CHECK(strict_log_lambda(l, 1) > strict_log_lambda(l, 0));
    }
}

TEST_CASE("shear flows on the grid") {
    GeometricBasis basis = build_geometric_basis();
    IterParams prm = IterParams::toy(0, 2.0, 8.0, 0.5, 4.0, 1, 1e-2, 0.125, 0.02);
    GridSpec grid(64);
    ShearFlowSet flows = build_shear_flows(basis, prm, grid);

    SUBCASE("captured profile mass grows with the harmonic budget") {
        IterParams fine = IterParams::toy(0, 2.0, 2.0, 0.5, 4.0, 1, 1e-2, 0.125, 0.02);
        ShearFlowSet ff = build_shear_flows(basis, fine, GridSpec(128));
        for (std::size_t i = 0; i < ff.captured_mass.size(); ++i) {
            CHECK(ff.captured_mass[i] > 0.3);             // 15 harmonics
            CHECK(ff.captured_mass[i] > flows.captured_mass[i]);
        }
    }

    SUBCASE("mean zero and unit mean square, exactly") {
        for (std::size_t i = 0; i < basis.total_frames(); ++i) {
            CHECK(std::abs(flows.phi[i].mean()) < 1e-12);
            double ms = 0;
            for (double v : flows.phi[i].values) ms += v * v;
            ms /= double(flows.phi[i].values.size());
            CHECK(ms == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(flows.renorm_shift[i] == 0.0);
            CHECK(flows.renorm_scale[i] > 0.0);
            CHECK(flows.captured_mass[i] > 0.0);
            CHECK(flows.captured_mass[i] <= 1.0 + 1e-12);
        }
    }
    SUBCASE("flow direction and divergence") {
        VectorField w = flows.velocity_flow(0);
        const Vec3 k1 = basis.frame(0).k1d;
        // parallel to k1 everywhere: w x k1 = 0
        double worst = 0;
        for (std::size_t pnt = 0; pnt < grid.points(); ++pnt) {
            Vec3 v{w.comp[0].values[pnt], w.comp[1].values[pnt], w.comp[2].values[pnt]};
            worst = std::max(worst, norm(cross(v, k1)));
        }
        CHECK(worst < 1e-12);
        CHECK(divergence_l2(w) < 1e-10 * lp_norm(w, 2.0));
        std::size_t бm = basis.lambda_u.size();
        VectorField d = flows.magnetic_flow(бm);
        CHECK(divergence_l2(d) < 1e-10 * lp_norm(d, 2.0));
    }
    SUBCASE("curl curl of the potential reproduces the flow") {
        for (std::size_t i : {std::size_t(0), basis.lambda_u.size()}) {
            VectorField wc = flows.velocity_potential_flow(i);
            VectorField cc = curl(curl(wc));
            VectorField w = flows.velocity_flow(i);
            CHECK(max_abs(cc - w) < 1e-9 * std::max(1.0, max_abs(w)));
        }
    }
    SUBCASE("periodization consistency under the lattice period shift") {
        // phi_(k) is (2 pi / (lambda r_perp))-periodic along k; on the grid
        // the shift by n / (J * N) points along an axis-aligned component of
        // m N k must reproduce values where representable. Use the field's
        // own periodicity: shifting by n/J points in each axis multiplies the
        // phase by m1+m2+m3 full periods.
        const int n = grid.n_per_axis;
        long j = flows.j_freq;
        REQUIRE(n % j == 0);
        int shift = int(n / j);
        const ScalarField& f = flows.phi[0];
        double worst = 0;
        for (int iz = 0; iz < n; ++iz)
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix) {
                    double a = f.at(ix, iy, iz);
                    double b = f.at((ix + shift) % n, (iy + shift) % n, (iz + shift) % n);
                    worst = std::max(worst, std::abs(a - b));
                }
        CHECK(worst < 1e-10);
    }
    SUBCASE("unresolvable frequency is rejected") {
        IterParams tooBig = IterParams::toy(0, 2.0, 64.0, 0.5, 4.0, 1, 1e-2, 0.125, 0.02);
        CHECK_THROWS(build_shear_flows(basis, tooBig, GridSpec(32)));
    }
    SUBCASE("non-integral lambda r_perp is rejected") {
        IterParams frac = IterParams::toy(0, 2.0, 9.0, 0.4, 4.0, 1, 1e-2, 0.125, 0.02);
        CHECK_THROWS(build_shear_flows(basis, frac, grid));
    }
}

TEST_CASE("temporal blocks") {
    IterParams prm = IterParams::toy(0, 2.0, 8.0, 0.5, 4.0, 2, 1e-2, 0.125, 0.02);
    const double T = 1.0;
    TemporalBlockSet blocks = build_temporal_blocks(12, prm, T);

    SUBCASE("normalization: mean square of g_(k) over [0, T] is 1") {
        const int samples = 1 << 18;
        for (std::size_t k : {std::size_t(0), std::size_t(5), std::size_t(11)}) {
            double acc = 0;
            for (int i = 0; i < samples; ++i) acc += std::pow(blocks.g(k, T * i / samples), 2);
            CHECK(acc / samples == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
    SUBCASE("supports pairwise disjoint, exactly") {
        const int samples = 1 << 16;
        double worst = 0;
        for (int i = 0; i < samples; ++i) {
            double t = T * i / samples;
            for (std::size_t a = 0; a < blocks.count; ++a) {
                double ga = blocks.g(a, t);
                if (ga == 0.0) continue;
                for (std::size_t b = a + 1; b < blocks.count; ++b)
                    worst = std::max(worst, std::abs(ga * blocks.g(b, t)));
            }
        }
        CHECK(worst == 0.0);
    }
    SUBCASE("h matches an independent quadrature of g^2 - 1") {
        // composite Simpson so the oracle's own error stays below the target
        const int samples = 1 << 17;
        std::size_t k = 3;
        double acc = 0, worst = 0;
        double dt = T / samples;
        for (int i = 0; i < samples; ++i) {
            double tl = i * dt, tm = (i + 0.5) * dt, tr = (i + 1) * dt;
            // d/dt h_(k) = sigma (g_(k)^2 - 1) from the inner rescaling
            auto f = [&](double t) {
                return double(blocks.sigma) * (std::pow(blocks.g(k, t), 2) - 1.0);
            };
            acc += dt / 6.0 * (f(tl) + 4.0 * f(tm) + f(tr));
            worst = std::max(worst, std::abs(acc - blocks.h(k, tr)));
        }
        CHECK(worst < 1e-8);
        CHECK(std::abs(blocks.h(k, 0.0)) < 1e-12);
    }
    SUBCASE("h is bounded") {
        const int samples = 1 << 14;
        double m = 0;
        for (int i = 0; i < samples; ++i) m = std::max(m, std::abs(blocks.h(2, T * i / samples)));
        CHECK(m < 2.0 * T);
    }
    SUBCASE("analytic derivative of g against finite differences") {
        std::size_t k = 7;
        auto [lo, hi] = blocks.base_support(k);
        double t0 = 0.5 * (lo + hi);
        double h = 1e-7;
        double fd = (blocks.g(k, t0 + h) - blocks.g(k, t0 - h)) / (2 * h);
        CHECK(fd == doctest::Approx(blocks.g_dt(k, t0)).epsilon(1e-5));
    }
    SUBCASE("shifts that cannot fit are rejected") {
        IterParams prm2 = prm;
        CHECK_THROWS(build_temporal_blocks(0, prm2, T));
    }
}

TEST_CASE("scaling fits") {
    ProfilePair prof = make_profiles(1 << 12);
    SUBCASE("L^p of phi vs r_perp") {
        auto fits = verify_shear_scaling(prof, {0.5, 0.25, 0.125, 0.0625},
                                         {1.0, 2.0, INFINITY});
        REQUIRE(fits.size() == 3);
        CHECK(fits[0].expected == doctest::Approx(0.5));
        CHECK(fits[1].expected == doctest::Approx(0.0));
        CHECK(fits[2].expected == doctest::Approx(-0.5));
        for (const auto& f : fits) CHECK(f.pass());
    }
    SUBCASE("sweep too small is rejected") {
        CHECK_THROWS(verify_shear_scaling(prof, {0.5, 0.4}, {2.0}));
    }
    SUBCASE("gradient gain vs lambda") {
        auto fits = verify_shear_gradient_gain(prof, 0.5, {4, 8, 16, 32}, 5);
        REQUIRE(fits.size() == 3);
        for (const auto& f : fits) CHECK(f.pass());
    }
    SUBCASE("L^gamma of g vs tau") {
        IterParams prm = IterParams::toy(0, 2.0, 8.0, 0.5, 4.0, 1, 1e-2, 0.125, 0.02);
        auto fits = verify_temporal_scaling(prm, 1.0, {2, 4, 8, 16}, {1.0, 2.0, INFINITY});
        REQUIRE(fits.size() == 3);
        CHECK(fits[0].expected == doctest::Approx(-0.5));
        CHECK(fits[1].expected == doctest::Approx(0.0));
        CHECK(fits[2].expected == doctest::Approx(0.5));
        for (const auto& f : fits) CHECK(f.pass());
    }
}
