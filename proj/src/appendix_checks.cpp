#include "tmhd/appendix_checks.hpp"

#include <cmath>
#include <stdexcept>

#include "tmhd/spectral_ops.hpp"

namespace tmhd {

namespace {

// Volume-normalized L^p over the grid, the convention that makes
// ||1||_p = 1 and the constant-factor cases of the inequality exact.
double mean_lp(const std::vector<double>& vals, double p) {
    if (std::isinf(p)) {
        double m = 0;
        for (double v : vals) m = std::max(m, std::abs(v));
        return m;
    }
    double acc = 0;
    for (double v : vals) acc += std::pow(std::abs(v), p);
    return std::pow(acc / vals.size(), 1.0 / p);
}

}  // namespace

DecorrelationResult decorrelation_check(const ScalarField& f,
                                        const std::function<double(double)>& g, int g_max_freq,
                                        int theta, double p) {
    if (theta < 1) throw std::invalid_argument("decorrelation_check: theta must be a positive integer");
    const GridSpec& grid = f.grid;
    // Strict margin: the quadrature of |f g(theta.)|^p needs the product
    // bandwidth inside the grid, and a profile exactly at Nyquist samples to
    // zero. Half the Nyquist keeps squared products representable.
    if (2L * theta * g_max_freq > grid.nyquist())
        throw std::invalid_argument("decorrelation_check: g(theta.) not resolved by the grid");

    const int n = grid.n_per_axis;
    std::vector<double> grow(n);
    for (int ix = 0; ix < n; ++ix) grow[ix] = g(theta * grid.coord(ix));

    std::vector<double> prod(grid.points());
    std::size_t idx = 0;
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix, ++idx) prod[idx] = f.values[idx] * grow[ix];

    // g's own norm from a dense 1D sample (independent of theta).
    const int m1 = 1 << 16;
    std::vector<double> gsamp(m1);
    for (int i = 0; i < m1; ++i) gsamp[i] = g(kTwoPi * i / m1);

    double lhs = mean_lp(prod, p);
    double fg = mean_lp(f.values, p) * mean_lp(gsamp, p);

    DecorrelationResult r;
    r.lhs_error = std::abs(lhs - fg);
    double f_c1 = max_abs(f) + max_abs(gradient(f));
    double rate = std::isinf(p) ? 1.0 : std::pow(double(theta), -1.0 / p);
    r.bound = rate * f_c1 * mean_lp(gsamp, p);
    return r;
}

CommutatorResult commutator_check(const ScalarField& a, const ScalarField& f, int k_cut, double p) {
    if (!(p > 1.0) || std::isinf(p))
        throw std::invalid_argument("commutator_check: requires 1 < p < inf");
    if (k_cut >= a.grid.nyquist())
        throw std::invalid_argument("commutator_check: k_cut beyond Nyquist");

    ScalarField hf = high_pass(f, k_cut);
    ScalarField prod = a * hf;
    Spectrum s = to_spectrum(prod);
    apply_multiplier(s, [](int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        return k2 == 0.0 ? 0.0 : 1.0 / std::sqrt(k2);
    });
    ScalarField lhs_field = to_physical(s, a.grid);

    CommutatorResult r;
    r.lhs = lp_norm(lhs_field, p);
    // || grad^2 a ||_inf as the max pointwise Frobenius norm of the Hessian.
    VectorField ga = gradient(a);
    std::vector<double> h2(a.grid.points(), 0.0);
    for (int c = 0; c < 3; ++c) {
        VectorField gc = gradient(ga.comp[c]);
        for (int d = 0; d < 3; ++d)
            for (std::size_t i = 0; i < h2.size(); ++i)
                h2[i] += gc.comp[d].values[i] * gc.comp[d].values[i];
    }
    double hess_inf = 0;
    for (double v : h2) hess_inf = std::max(hess_inf, v);
    hess_inf = std::sqrt(hess_inf);
    r.bound = hess_inf * lp_norm(f, p) / k_cut;
    r.ratio = r.bound > 0 ? r.lhs / r.bound : 0.0;
    return r;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_loglog_slope: need matching sweeps with >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace tmhd
