#include "tmhd/building_blocks.hpp"

#include <cmath>
#include <stdexcept>

#include "tmhd/quadrature.hpp"
#include "tmhd/spectral_ops.hpp"

namespace tmhd {

IterParams IterParams::toy(int q, double lambda_q, double lambda, double r_perp, double tau,
                           long sigma, double delta_next, double varsigma, double ell, double T,
                           double alpha, double nu) {
    IterParams p;
    p.strict = false;
    p.q = q;
    p.lambda_q = lambda_q;
    p.lambda = lambda;
    p.r_perp = r_perp;
    p.tau = tau;
    p.sigma = sigma;
    p.delta_next = delta_next;
    p.varsigma = varsigma;
    p.ell = ell;
    p.T = T;
    p.alpha = alpha;
    p.nu = nu;
    if (!(r_perp > 0 && r_perp < 1)) throw std::invalid_argument("IterParams: r_perp must lie in (0,1)");
    if (tau < 1) throw std::invalid_argument("IterParams: tau must be >= 1");
    if (sigma < 1) throw std::invalid_argument("IterParams: sigma must be >= 1");
    if (!(lambda > 0 && lambda_q > 0 && delta_next > 0 && varsigma > 0 && ell > 0 && T > 0))
        throw std::invalid_argument("IterParams: scales must be positive");
    if (!(alpha >= 1.0 && alpha < 1.5)) throw std::invalid_argument("IterParams: alpha outside [1, 3/2)");
    return p;
}

void validate_strict_ladder(const StrictLadder& l) {
    auto fail = [](const std::string& what) {
        throw std::invalid_argument("strict parameter constraint violated: " + what);
    };
    // smallest integer c with q 80^q <= c 85^q for all q
    const double c = 7.0;
    double amin = std::pow(85.0 * 8.0 * 80.0 * l.r_moment * l.l_noise * l.l_noise, c);
    if (!(l.a >= amin))
        fail("a >= (85*8*80 r L^2)^c, need a >= " + std::to_string(amin));
    if (l.b <= 0 || (l.b % 2) != 0) fail("b must be a positive even integer");
    // b > 16000 / eps, exactly in rationals
    if (!(Fraction(16000) < Fraction(l.b) * l.eps)) fail("b > 16000 / eps");
    if (!(l.beta > 0 && l.beta <= 5.0 / (2.0 * double(l.b) * double(l.b))))
        fail("beta in (0, 5/(2 b^2)]");
    if (!(l.delta_holder > 0 && l.delta_holder < 1.0 / 60.0)) fail("delta < 1/60");
    double alpha = l.alpha.to_double();
    if (!(alpha >= 1.0 && alpha < 1.5)) fail("alpha in [1, 3/2)");
    double cap1 = 1.5 - alpha;
    double cap2 = 2 * alpha / l.gamma_lps + (2 * alpha - 2) / l.p_lps - (2 * alpha - 1) - l.s_lps;
    if (!(l.eps.to_double() <= std::min(cap1, cap2) / 20.0))
        fail("eps <= (1/20) min{3/2 - alpha, 2a/gamma + (2a-2)/p - (2a-1) - s}");
    // integrality: b(2 - 2 alpha - 10 eps) and b eps in N, in exact arithmetic
    Fraction be = Fraction(l.b) * l.eps;
    if (be.den != 1 || be.num <= 0) fail("b * eps must be a positive integer");
    Fraction expo = Fraction(l.b) * (Fraction(2) - Fraction(2) * l.alpha - Fraction(10) * l.eps);
    if (expo.den != 1) fail("b (2 - 2 alpha - 10 eps) must be an integer");
}

double strict_log_lambda(const StrictLadder& l, int q) {
    return std::pow(double(l.b), double(q)) * std::log(l.a);
}

// ------------------------------------------------------------- shear flows

ShearFlowSet build_shear_flows(const GeometricBasis& basis, const IterParams& params,
                               const GridSpec& grid) {
    ShearFlowSet s;
    s.grid = grid;
    s.basis = &basis;
    s.params = params;
    s.profile = make_profiles(1 << 14);

    double jf = params.lambda * params.r_perp;
    if (std::abs(jf - std::round(jf)) > 1e-9)
        throw std::invalid_argument("build_shear_flows: lambda * r_perp must be an integer");
    s.j_freq = static_cast<long>(std::round(jf));

    // base oscillation frequency must be representable
    double base_freq = params.lambda * params.r_perp * double(basis.n_lambda);
    if (base_freq > grid.nyquist())
        throw std::invalid_argument("build_shear_flows: base frequency beyond grid Nyquist");

    const int n = grid.n_per_axis;
    const std::size_t nframes = basis.total_frames();
    s.phi.reserve(nframes);
    s.potential.reserve(nframes);
    for (std::size_t i = 0; i < nframes; ++i) {
        const WaveVectorFrame& f = basis.frame(i);
        // integer direction m = N k
        long m[3];
        long m_inf = 0;
        for (int c = 0; c < 3; ++c) {
            Fraction scaled = f.k[c] * Fraction(basis.n_lambda);
            if (scaled.den != 1) throw std::logic_error("build_shear_flows: N k not integral");
            m[c] = scaled.num;
            m_inf = std::max(m_inf, std::labs(m[c]));
        }
        // The grid field is built spectrally on the exact lattice multiples
        // of J m, so it is a function of k.x alone: divergence-free flows,
        // exact periodicity, no aliased cross-direction content. The profile
        // is truncated at the harmonics the grid can represent.
        long max_harm = (n / 2 - 1) / (s.j_freq * m_inf);
        if (max_harm < 1)
            throw std::invalid_argument("build_shear_flows: oscillation unresolved on this grid");
        std::vector<double> coef(max_harm + 1, 0.0);
        double kept = 0;
        for (long l = 1; l <= max_harm; ++l) {
            coef[l] = integrate(
                          [&](double y) {
                              return rescaled_profile(s.profile, params.r_perp, y) *
                                     std::cos(double(l) * y);
                          },
                          -params.r_perp, params.r_perp, 96, 16) /
                      kTwoPi;  // c_l = (1/2pi) int phi_r(y) cos(l y) dy
            kept += 2.0 * coef[l] * coef[l];
        }
        // renormalize to exact unit discrete mean square
        double scale = 1.0 / std::sqrt(kept);
        s.renorm_shift.push_back(0.0);
        s.renorm_scale.push_back(scale);
        s.captured_mass.push_back(kept);

        Spectrum sp(n);
        Spectrum pot(n);
        for (long l = 1; l <= max_harm; ++l) {
            long xi[3] = {l * s.j_freq * m[0], l * s.j_freq * m[1], l * s.j_freq * m[2]};
            double k2 = double(xi[0]) * xi[0] + double(xi[1]) * xi[1] + double(xi[2]) * xi[2];
            // canonical half-spectrum slot (conjugate pair implied; the
            // coefficient is real so kx = 0 plane entries mirror plainly)
            long cx = xi[0], cy = xi[1], cz = xi[2];
            if (cx < 0 || (cx == 0 && (cy < 0 || (cy == 0 && cz < 0)))) {
                cx = -cx;
                cy = -cy;
                cz = -cz;
            }
            int my = int(cy >= 0 ? cy : cy + n);
            int mz = int(cz >= 0 ? cz : cz + n);
            double c = coef[l] * scale;
            sp.at(int(cx), my, mz) = c;
            pot.at(int(cx), my, mz) = c / k2;
            if (cx == 0) {  // mirror inside the stored plane
                int myc = int(cy <= 0 ? -cy : n - cy);
                int mzc = int(cz <= 0 ? -cz : n - cz);
                sp.at(0, myc, mzc) = c;
                pot.at(0, myc, mzc) = c / k2;
            }
        }
        s.phi.push_back(to_physical(sp, grid));
        s.potential.push_back(to_physical(pot, grid));
    }
    return s;
}

namespace {
VectorField along(const ScalarField& f, const Vec3& dir) {
    VectorField out(f.grid);
    for (int c = 0; c < 3; ++c) {
        out.comp[c] = f;
        for (double& v : out.comp[c].values) v *= dir[c];
    }
    return out;
}
}  // namespace

VectorField ShearFlowSet::velocity_flow(std::size_t i) const {
    return along(phi[i], basis->frame(i).k1d);
}
VectorField ShearFlowSet::magnetic_flow(std::size_t i) const {
    if (basis->is_velocity_family(i))
        throw std::invalid_argument("magnetic_flow: frame not in the magnetic family");
    return along(phi[i], basis->frame(i).k2d);
}
VectorField ShearFlowSet::velocity_potential_flow(std::size_t i) const {
    return along(potential[i], basis->frame(i).k1d);
}
VectorField ShearFlowSet::magnetic_potential_flow(std::size_t i) const {
    if (basis->is_velocity_family(i))
        throw std::invalid_argument("magnetic_potential_flow: frame not in the magnetic family");
    return along(potential[i], basis->frame(i).k2d);
}

// --------------------------------------------------------- temporal blocks

TemporalBlockSet build_temporal_blocks(std::size_t count, const IterParams& params, double T) {
    if (count == 0) throw std::invalid_argument("build_temporal_blocks: count must be positive");
    TemporalBlockSet b;
    b.T = T;
    b.tau = params.tau;
    b.sigma = params.sigma;
    b.count = count;
    // one slot per cutoff, bump in the first half of the slot
    double slot = T / double(count);
    b.width = slot / 2.0;
    if (double(count) * b.width >= T)
        throw std::invalid_argument("build_temporal_blocks: supports do not fit disjointly");
    for (std::size_t i = 0; i < count; ++i) b.shift.push_back(double(i) * slot);
    // normalize: int_0^T g_k^2 = T
    b.amplitude = std::sqrt(T / (b.width * bump01_sq_mass()));
    return b;
}

double TemporalBlockSet::g_base(std::size_t i, double t) const {
    double u = (t - shift[i]) / width;
    return amplitude * smooth_bump01(u);
}

namespace {
double wrap_period(double t, double period) {
    double w = std::fmod(t, period);
    if (w < 0) w += period;
    return w;
}
}  // namespace

double TemporalBlockSet::g(std::size_t i, double t) const {
    // g_(k)(t) = sqrt(tau) g_k(tau * ((sigma t) mod T)); g_k vanishes
    // outside its support so arguments beyond T contribute nothing.
    double s = wrap_period(double(sigma) * t, T);
    return std::sqrt(tau) * g_base(i, tau * s);
}

double TemporalBlockSet::g_dt(std::size_t i, double t) const {
    double s = wrap_period(double(sigma) * t, T);
    double u = (tau * s - shift[i]) / width;
    if (u <= 0 || u >= 1) return 0.0;
    // d/du of bump01 = bump'(2u-1) * 2
    double x = 2.0 * u - 1.0;
    double ss = 1.0 - x * x;
    double bp = smooth_bump(x) * (-2.0 * x / (ss * ss)) * 2.0;
    return std::sqrt(tau) * amplitude * bp * tau * double(sigma) / width;
}

double TemporalBlockSet::h(std::size_t i, double t) const {
    // h_{k,tau}(s) = int_0^s (g_{k,tau}^2 - 1) = G(min(tau s, T)) - s, with
    // G the running integral of g_k^2; h_(k)(t) = h_{k,tau}((sigma t) mod T).
    double s = wrap_period(double(sigma) * t, T);
    double v = (tau * s - shift[i]) / width;
    double running = amplitude * amplitude * width * bump01_sq_integral(v);
    return running - s;
}

std::pair<double, double> TemporalBlockSet::base_support(std::size_t i) const {
    return {shift[i] / (tau * double(sigma)), (shift[i] + width) / (tau * double(sigma))};
}

// ------------------------------------------------------------ scaling fits

namespace {

// 1D L^p of the periodized rescaled profile (volume-normalized in the
// oscillation variable; the (2pi)^{3/p} volume factor cancels in slope fits).
double profile_lp(const ProfilePair& prof, double r_perp, double p, int deriv) {
    // derivatives by high-order central differences on the analytic profile
    auto eval = [&](double y) {
        double h = 1e-3 * r_perp;
        auto f = [&](double x) { return rescaled_profile(prof, r_perp, x); };
        switch (deriv) {
            case 0:
                return f(y);
            case 1:
                return (-f(y + 2 * h) + 8 * f(y + h) - 8 * f(y - h) + f(y - 2 * h)) / (12 * h);
            case 2:
                return (-f(y + 2 * h) + 16 * f(y + h) - 30 * f(y) + 16 * f(y - h) - f(y - 2 * h)) /
                       (12 * h * h);
            default:
                throw std::invalid_argument("profile_lp: derivative order");
        }
    };
    if (std::isinf(p)) {
        double m = 0;
        const int samples = 1 << 14;
        for (int i = 0; i < samples; ++i) {
            double y = -r_perp + 2.0 * r_perp * i / samples;
            m = std::max(m, std::abs(eval(y)));
        }
        return m;
    }
    double integral = integrate([&](double y) { return std::pow(std::abs(eval(y)), p); }, -r_perp,
                                r_perp, 128, 16);
    return std::pow(integral / kTwoPi, 1.0 / p);
}

}  // namespace

std::vector<ScalingFit> verify_shear_scaling(const ProfilePair& prof,
                                             const std::vector<double>& r_perp_sweep,
                                             const std::vector<double>& p_list) {
    if (r_perp_sweep.size() < 4)
        throw std::invalid_argument("verify_shear_scaling: need a sweep of >= 4 values");
    double lo = *std::min_element(r_perp_sweep.begin(), r_perp_sweep.end());
    double hi = *std::max_element(r_perp_sweep.begin(), r_perp_sweep.end());
    if (hi / lo < 4.0)
        throw std::invalid_argument("verify_shear_scaling: sweep must span >= 2 dyadic decades");
    std::vector<ScalingFit> out;
    for (double p : p_list) {
        std::vector<double> norms;
        for (double r : r_perp_sweep) norms.push_back(profile_lp(prof, r, p, 0));
        std::vector<double> xs(r_perp_sweep.begin(), r_perp_sweep.end());
        double slope;
        {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                double lx = std::log(xs[i]), ly = std::log(norms[i]);
                sx += lx;
                sy += ly;
                sxx += lx * lx;
                sxy += lx * ly;
            }
            double m = double(xs.size());
            slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        }
        double expected = (std::isinf(p) ? 0.0 : 1.0 / p) - 0.5;
        out.push_back({"phi L^" + (std::isinf(p) ? std::string("inf") : std::to_string(p)) +
                           " exponent vs r_perp",
                       slope, expected, 0.1});
    }
    return out;
}

std::vector<ScalingFit> verify_shear_gradient_gain(const ProfilePair& prof, double r_perp,
                                                   const std::vector<double>& lambda_sweep,
                                                   long n_lambda) {
    // Measure || d^N/dzeta^N phi_{r}(J zeta) ||_{L^2} along the oscillation
    // coordinate by finite differences of the composed function itself, so
    // the lambda dependence is observed rather than assumed.
    std::vector<ScalingFit> out;
    for (int deriv = 0; deriv <= 2; ++deriv) {
        std::vector<double> norms;
        for (double lam : lambda_sweep) {
            double j = lam * r_perp * double(n_lambda);
            auto compose = [&](double z) {
                return rescaled_profile(prof, r_perp, j * z);
            };
            double h = 1e-3 * r_perp / j;
            auto dN = [&](double z) {
                switch (deriv) {
                    case 0:
                        return compose(z);
                    case 1:
                        return (-compose(z + 2 * h) + 8 * compose(z + h) - 8 * compose(z - h) +
                                compose(z - 2 * h)) /
                               (12 * h);
                    default:
                        return (-compose(z + 2 * h) + 16 * compose(z + h) - 30 * compose(z) +
                                16 * compose(z - h) - compose(z - 2 * h)) /
                               (12 * h * h);
                }
            };
            // one profile copy spans |z| <= r_perp / j; mean over the torus
            double copy = r_perp / j;
            double integral =
                integrate([&](double z) { return dN(z) * dN(z); }, -copy, copy, 96, 16);
            norms.push_back(std::sqrt(integral * j / kTwoPi));
        }
        std::vector<double> xs(lambda_sweep.begin(), lambda_sweep.end());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double lx = std::log(xs[i]), ly = std::log(norms[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        double m = double(xs.size());
        double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        out.push_back({"grad^" + std::to_string(deriv) + " gain vs lambda", slope, double(deriv),
                       0.1 * std::max(1, deriv)});
    }
    return out;
}

std::vector<ScalingFit> verify_temporal_scaling(const IterParams& base, double T,
                                                const std::vector<double>& tau_sweep,
                                                const std::vector<double>& gamma_list) {
    std::vector<ScalingFit> out;
    for (double gamma : gamma_list) {
        std::vector<double> norms;
        for (double tau : tau_sweep) {
            IterParams p = base;
            p.tau = tau;
            TemporalBlockSet blocks = build_temporal_blocks(12, p, T);
            // dense quadrature of |g_(0)|^gamma over one sigma-period
            const int samples = 1 << 18;
            double period = T / double(p.sigma);
            if (std::isinf(gamma)) {
                double m = 0;
                for (int i = 0; i < samples; ++i)
                    m = std::max(m, std::abs(blocks.g(0, period * i / samples)));
                norms.push_back(m);
            } else {
                double acc = 0;
                for (int i = 0; i < samples; ++i)
                    acc += std::pow(std::abs(blocks.g(0, period * i / samples)), gamma);
                acc = acc / samples * period * double(p.sigma);  // over [0, T]
                norms.push_back(std::pow(acc, 1.0 / gamma));
            }
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < tau_sweep.size(); ++i) {
            double lx = std::log(tau_sweep[i]), ly = std::log(norms[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        double m = double(tau_sweep.size());
        double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        double expected = 0.5 - (std::isinf(gamma) ? 0.0 : 1.0 / gamma);
        out.push_back({"g L^" + (std::isinf(gamma) ? std::string("inf") : std::to_string(gamma)) +
                           " exponent vs tau",
                       slope, expected, 0.1});
    }
    return out;
}

}  // namespace tmhd
