// Spectral Galerkin solver for the linearized system: projection algebra,
// energy ledger, cancellations, decay and uniqueness.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tmhd/galerkin.hpp"
#include "tmhd/spectral_ops.hpp"

using namespace tmhd;

namespace {

VectorField random_divfree(const GridSpec& g, int max_mode, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    VectorField base(g);
    const int n = g.n_per_axis;
    for (int c = 0; c < 3; ++c) {
        Spectrum s(n);
        for (int kz = -max_mode; kz <= max_mode; ++kz)
            for (int ky = -max_mode; ky <= max_mode; ++ky)
                for (int kx = 0; kx <= max_mode; ++kx) {
                    if (kx == 0 && (kz < 0 || (kz == 0 && ky <= 0) || ky < 0)) continue;
                    std::complex<double> cc(amp(rng), amp(rng));
                    int my = ky >= 0 ? ky : ky + n;
                    int mz = kz >= 0 ? kz : kz + n;
                    s.at(kx, my, mz) = cc;
                }
        base.comp[c] = to_physical(s, g);
    }
    return leray_project(remove_mean(base));
}

TimeField steady(const VectorField& f) {
    return [f](double, const GridSpec& g) {
        if (g != f.grid) throw std::invalid_argument("steady: grid mismatch");
        return f;
    };
}
TimeField zero_tf() {
    return [](double, const GridSpec& g) { return VectorField(g); };
}

}  // namespace

TEST_CASE("projection algebra") {
    GridSpec g(16);
    auto basis = stokes_basis(2);
    SUBCASE("projection fixes basis spans and kills the complement") {
        // exact span member: reconstruct from random coefficients
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> amp(-1.0, 1.0);
        std::vector<double> c0(basis.size());
        for (double& v : c0) v = amp(rng);
        VectorField f = reconstruct_pn(c0, basis, g);
        auto c = project_pn(f, basis);
        double cdev = 0;
        for (std::size_t i = 0; i < c.size(); ++i) cdev = std::max(cdev, std::abs(c[i] - c0[i]));
        CHECK(cdev < 1e-12);
        VectorField back = reconstruct_pn(c, basis, g);
        CHECK(max_abs(back - f) < 1e-12 * std::max(1.0, max_abs(f)));

        VectorField high = random_divfree(g, 5, 7) - random_divfree(g, 2, 7);
        // a field orthogonal to the retained modes: subtract its projection
        auto ch = project_pn(high, basis);
        VectorField tail = high - reconstruct_pn(ch, basis, g);
        auto czero = project_pn(tail, basis);
        double m = 0;
        for (double v : czero) m = std::max(m, std::abs(v));
        CHECK(m < 1e-12 * std::max(1.0, max_abs(high)));
    }
    SUBCASE("self-adjointness on random pairs") {
        VectorField u = random_divfree(g, 4, 11), v = random_divfree(g, 4, 13);
        VectorField pu = reconstruct_pn(project_pn(u, basis), basis, g);
        VectorField pv = reconstruct_pn(project_pn(v, basis), basis, g);
        const double cell = std::pow(kTwoPi, 3.0) / double(g.points());
        double a = 0, b = 0;
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < g.points(); ++p) {
                a += pu.comp[c].values[p] * v.comp[c].values[p];
                b += u.comp[c].values[p] * pv.comp[c].values[p];
            }
        CHECK(std::abs(a - b) * cell < 1e-12 * std::max(1.0, std::abs(a) * cell));
    }
    SUBCASE("L2 norm bound") {
        VectorField u = random_divfree(g, 4, 17);
        VectorField pu = reconstruct_pn(project_pn(u, basis), basis, g);
        CHECK(lp_norm(pu, 2.0) <= lp_norm(u, 2.0) * (1 + 1e-12));
    }
}

TEST_CASE("pure decay matches the closed form exactly") {
    GalerkinConfig cfg;
    cfg.max_wavenumber = 2;
    cfg.grid_n = 16;
    cfg.dt = 1e-2;
    cfg.t_end = 0.3;
    cfg.alpha = 1.25;
    cfg.nu = 0.7;
    GridSpec g(cfg.grid_n);
    VectorField v0 = random_divfree(g, 2, 5);
    LinearizedState st =
        solve_linearized(cfg, zero_tf(), zero_tf(), zero_tf(), zero_tf(), v0, VectorField(g));
    auto c0 = project_pn(v0, st.basis);
    std::size_t last = st.times.size() - 1;
    double worst = 0;
    for (std::size_t i = 0; i < st.basis.size(); ++i) {
        double mu = cfg.nu * std::pow(st.basis[i].eigenvalue, cfg.alpha);
        double expect = c0[i] * std::exp(-mu * st.times[last]);
        worst = std::max(worst, std::abs(st.v_coeff[last][i] - expect));
    }
    CHECK(worst < 1e-12 * std::max(1.0, max_abs(v0)));
    SUBCASE("energy non-increasing without forcing") {
        for (std::size_t n = 1; n < st.ledger.energy.size(); ++n)
            CHECK(st.ledger.energy[n] <= st.ledger.energy[n - 1] * (1 + 1e-12));
        CHECK(st.ledger.worst_violation <= 1e-10);
    }
}

TEST_CASE("discrete cancellations") {
    GridSpec g(32);
    auto basis = stokes_basis(3);
    VectorField u = random_divfree(g, 3, 21);
    VectorField b = random_divfree(g, 3, 23);
    VectorField v = reconstruct_pn(project_pn(random_divfree(g, 3, 25), basis), basis, g);
    VectorField h = reconstruct_pn(project_pn(random_divfree(g, 3, 27), basis), basis, g);
    auto rep = cancellation_check(u, b, v, h, basis);
    CHECK(std::abs(rep.self_term) < 1e-10 * std::max(1.0, rep.scale));
    CHECK(std::abs(rep.cross_term) < 1e-10 * std::max(1.0, rep.scale));
}

TEST_CASE("energy ledger with advecting fields and noise") {
    GalerkinConfig cfg;
    cfg.max_wavenumber = 2;
    cfg.grid_n = 16;
    cfg.dt = 2e-3;
    cfg.t_end = 0.25;
    GridSpec g(cfg.grid_n);
    VectorField u = 0.3 * random_divfree(g, 2, 31);
    VectorField b = 0.2 * random_divfree(g, 2, 33);
    VectorField z1f = 0.05 * random_divfree(g, 2, 35);
    VectorField z2f = 0.05 * random_divfree(g, 2, 37);
    VectorField v0 = 0.5 * random_divfree(g, 2, 39);
    LinearizedState st = solve_linearized(cfg, steady(u), steady(b), steady(z1f), steady(z2f), v0,
                                          VectorField(g));
    // (8-24)-form inequality: E(t) + Diss(t) <= E(0) + |F|(t) within tolerance
    CHECK(st.ledger.worst_violation <= 1e-8 * std::max(1.0, st.ledger.energy.front()));
    SUBCASE("dissipation accumulates") { CHECK(st.ledger.dissipation_cum.back() > 0); }
    SUBCASE("solution stays finite") { CHECK(std::isfinite(st.ledger.final_energy)); }
}

TEST_CASE("galerkin consistency across truncation levels") {
    GalerkinConfig small;
    small.max_wavenumber = 2;
    small.grid_n = 16;
    small.dt = 1e-3;
    small.t_end = 0.1;
    GalerkinConfig big = small;
    big.max_wavenumber = 4;
    big.grid_n = 32;
    GridSpec gs(small.grid_n), gb(big.grid_n);
    // smooth low-mode data fully resolved by both levels
    VectorField v0s = random_divfree(gs, 1, 41);
    VectorField v0b(gb);
    {
        auto basis_small = stokes_basis(2);
        auto c = project_pn(v0s, basis_small);
        v0b = reconstruct_pn(c, basis_small, gb);
    }
    VectorField us = 0.08 * random_divfree(gs, 1, 43);
    VectorField ub(gb);
    {
        auto basis_small = stokes_basis(2);
        ub = reconstruct_pn(project_pn(us, basis_small), basis_small, gb);
    }
    LinearizedState a =
        solve_linearized(small, steady(us), zero_tf(), zero_tf(), zero_tf(), v0s, VectorField(gs));
    LinearizedState b =
        solve_linearized(big, steady(ub), zero_tf(), zero_tf(), zero_tf(), v0b, VectorField(gb));
    // shared modes agree up to the truncation tail the larger level retains
    double worst = 0;
    std::size_t last = a.times.size() - 1;
    for (std::size_t i = 0; i < a.basis.size(); ++i) {
        for (std::size_t j = 0; j < b.basis.size(); ++j) {
            const auto& ma = a.basis[i];
            const auto& mb = b.basis[j];
            if (ma.xi[0] == mb.xi[0] && ma.xi[1] == mb.xi[1] && ma.xi[2] == mb.xi[2] &&
                ma.sine == mb.sine && std::abs(dot(ma.pol, mb.pol) - 1.0) < 1e-12)
                worst = std::max(worst, std::abs(a.v_coeff[last][i] - b.v_coeff[last][j]));
        }
    }
    CHECK(worst < 2e-3 * std::max(1.0, max_abs(v0s)));
}

TEST_CASE("uniqueness checks") {
    GalerkinConfig cfg;
    cfg.max_wavenumber = 2;
    cfg.grid_n = 16;
    cfg.dt = 2e-3;
    cfg.t_end = 0.2;
    GridSpec g(cfg.grid_n);
    VectorField u = 0.3 * random_divfree(g, 2, 51);
    VectorField z1f = 0.05 * random_divfree(g, 2, 53);
    VectorField v0 = 0.4 * random_divfree(g, 2, 55);
    auto rep = uniqueness_check(cfg, steady(u), zero_tf(), steady(z1f), zero_tf(), v0,
                                VectorField(g));
    CHECK(rep.repeat_difference < 1e-10);
    CHECK(rep.zero_data_norm == 0.0);
    SUBCASE("perturbed data stays boundedly close") {
        VectorField v0b = v0 + 1e-4 * random_divfree(g, 2, 57);
        LinearizedState a =
            solve_linearized(cfg, steady(u), zero_tf(), steady(z1f), zero_tf(), v0, VectorField(g));
        LinearizedState b = solve_linearized(cfg, steady(u), zero_tf(), steady(z1f), zero_tf(),
                                             v0b, VectorField(g));
        std::size_t last = a.times.size() - 1;
        double d = 0;
        for (std::size_t i = 0; i < a.basis.size(); ++i)
            d = std::max(d, std::abs(a.v_coeff[last][i] - b.v_coeff[last][i]));
        CHECK(d < 1e-2);  // O(eta exp(Ct)) scale at these parameters
        CHECK(d > 0.0);
    }
}
