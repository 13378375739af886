#include "tmhd/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tmhd/appendix_checks.hpp"
#include "tmhd/spectral_ops.hpp"

namespace tmhd {

// ------------------------------------------------------------------- rng

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

double inverse_normal_cdf(double p) {
    // Wichura (1988), algorithm AS241, PPND16.
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p outside (0,1)");
    double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) *
                       r +
                   1.27045825245236838258e0) *
                      r +
                  3.64784832476320460504e0) *
                     r +
                 5.76949722146069140550e0) *
                    r +
                4.63033784615654529590e0) *
                   r +
               1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) *
                       r +
                   1.48103976427480074590e-1) *
                      r +
                  6.89767334985100004550e-1) *
                     r +
                 1.67638483018380384940e0) *
                    r +
                2.05319162663775882187e0) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) *
                       r +
                   2.65321895265761230930e-2) *
                      r +
                  2.96560571828504891230e-1) *
                     r +
                 1.78482653991729133580e0) *
                    r +
                5.46378491116411436990e0) *
                   r +
               6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) *
                       r +
                   7.86869131145613259100e-4) *
                      r +
                  1.48753612908506148525e-2) *
                     r +
                 1.36929880922735805310e-1) *
                    r +
                5.99832206555887937690e-1) *
                   r +
               1.0);
    }
    return q < 0 ? -val : val;
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t step, std::uint32_t lane) const {
    std::uint64_t h = splitmix64(seed_ ^ splitmix64(stream ^ splitmix64(step ^ (std::uint64_t(lane) << 32))));
    // (h + 0.5) / 2^64 lies strictly inside (0, 1)
    return (double(h >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double CounterRng::gaussian(std::uint64_t stream, std::uint64_t step, std::uint32_t lane) const {
    return inverse_normal_cdf(uniform(stream, step, lane));
}

// ------------------------------------------------------------------ model

double NoiseModel::trace_class(int channel) const {
    double s = 0;
    for (const auto& m : modes) s += m.coeff[channel] * m.coeff[channel];
    return s;
}

NoiseModel NoiseModel::build(int kmax, double amp1, double amp2, double spectral_exponent,
                             std::uint64_t seed) {
    if (kmax < 1) throw std::invalid_argument("NoiseModel: kmax must be >= 1");
    NoiseModel m;
    m.kmax = kmax;
    m.amplitude[0] = amp1;
    m.amplitude[1] = amp2;
    m.spectral_exponent = spectral_exponent;
    m.seed = seed;

    struct Entry {
        long norm2;
        int xi[3];
    };
    std::vector<Entry> waves;
    for (int x = 0; x <= kmax; ++x)
        for (int y = -kmax; y <= kmax; ++y)
            for (int z = -kmax; z <= kmax; ++z) {
                if (x == 0 && (y < 0 || (y == 0 && z <= 0))) continue;
                if (x == 0 && y == 0 && z == 0) continue;
                long n2 = long(x) * x + long(y) * y + long(z) * z;
                if (n2 > long(kmax) * kmax) continue;
                waves.push_back({n2, {x, y, z}});
            }
    std::sort(waves.begin(), waves.end(), [](const Entry& a, const Entry& b) {
        if (a.norm2 != b.norm2) return a.norm2 < b.norm2;
        if (a.xi[0] != b.xi[0]) return a.xi[0] < b.xi[0];
        if (a.xi[1] != b.xi[1]) return a.xi[1] < b.xi[1];
        return a.xi[2] < b.xi[2];
    });

    for (const auto& w : waves) {
        Vec3 xi{double(w.xi[0]), double(w.xi[1]), double(w.xi[2])};
        Vec3 helper = std::abs(xi.z) < 0.9 * norm(xi) ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        Vec3 p1 = cross(xi, helper);
        p1 = p1 * (1.0 / norm(p1));
        Vec3 p2 = cross(xi, p1);
        p2 = p2 * (1.0 / norm(p2));
        double cscale = std::pow(std::sqrt(double(w.norm2)), -spectral_exponent);
        for (const Vec3& pol : {p1, p2})
            for (bool sine : {false, true}) {
                NoiseMode mode;
                mode.xi[0] = w.xi[0];
                mode.xi[1] = w.xi[1];
                mode.xi[2] = w.xi[2];
                mode.pol = pol;
                mode.sine = sine;
                mode.coeff[0] = amp1 * cscale;
                mode.coeff[1] = amp2 * cscale;
                m.modes.push_back(mode);
            }
    }
    return m;
}

std::string NoiseModel::to_json() const {
    nlohmann::json j;
    j["kmax"] = kmax;
    j["amplitude"] = {amplitude[0], amplitude[1]};
    j["spectral_exponent"] = spectral_exponent;
    j["seed"] = seed;
    j["mode_count"] = modes.size();
    j["trace_class"] = {trace_class(0), trace_class(1)};
    return j.dump(2);
}

// ------------------------------------------------------------------ state

VectorField heat_semigroup(const VectorField& f, double t, double alpha, double nu) {
    if (t < 0) throw std::invalid_argument("heat_semigroup: t must be >= 0");
    auto s = to_spectrum(f);
    for (auto& comp : s)
        apply_multiplier(comp, [&](int kx, int ky, int kz) {
            double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
            return std::exp(-t * (nu * std::pow(k2, alpha) + 1.0));
        });
    return to_physical(s, f.grid);
}

NoiseState sample_convolution(const NoiseModel& model, const VectorField& u0,
                              const VectorField& b0, const std::vector<double>& times,
                              double alpha, double nu) {
    if (times.size() < 2) throw std::invalid_argument("sample_convolution: need a time grid");
    for (const VectorField* f : {&u0, &b0}) {
        if (divergence_l2(*f) > 1e-8 * std::max(1.0, lp_norm(*f, 2.0)))
            throw std::invalid_argument("sample_convolution: initial data must be divergence-free");
        for (int c = 0; c < 3; ++c)
            if (std::abs(f->comp[c].mean()) > 1e-10)
                throw std::invalid_argument("sample_convolution: initial data must be mean-free");
    }
    NoiseState st;
    st.model = model;
    st.alpha = alpha;
    st.nu = nu;
    st.times = times;
    st.u0 = u0;
    st.b0 = b0;
    CounterRng rng(model.seed);
    const std::size_t nm = model.modes.size();
    const std::size_t nt = times.size();
    for (int ch = 0; ch < 2; ++ch) {
        st.coeff[ch].assign(nm, std::vector<double>(nt, 0.0));
        for (std::size_t m = 0; m < nm; ++m) {
            const NoiseMode& mode = model.modes[m];
            double mu = mode.mu(alpha, nu);
            double c = mode.coeff[ch];
            std::uint64_t stream = (std::uint64_t(ch) << 48) | m;
            auto& path = st.coeff[ch][m];
            for (std::size_t n = 0; n + 1 < nt; ++n) {
                double dt = times[n + 1] - times[n];
                double decay = std::exp(-mu * dt);
                double sd = c * std::sqrt((1.0 - decay * decay) / (2.0 * mu));
                path[n + 1] = decay * path[n] + sd * rng.gaussian(stream, n);
            }
        }
    }
    return st;
}

VectorField NoiseState::convolution_field(int channel, std::size_t n, const GridSpec& g) const {
    const int ng = g.n_per_axis;
    std::array<Spectrum, 3> spec = {Spectrum(ng), Spectrum(ng), Spectrum(ng)};
    const double norm3 = std::pow(kTwoPi, 1.5);
    for (std::size_t m = 0; m < model.modes.size(); ++m) {
        const NoiseMode& mode = model.modes[m];
        double y = coeff[channel][m][n];
        if (y == 0.0) continue;
        if (std::max({std::abs(mode.xi[0]), std::abs(mode.xi[1]), std::abs(mode.xi[2])}) >
            g.nyquist() - 1)
            throw std::invalid_argument("NoiseState: mode beyond the grid Nyquist");
        // e_cos = sqrt(2) cos(xi.x) pol / (2pi)^{3/2}; coefficient at +xi is
        // a/2 for cos and -i a/2 for sin with a = sqrt(2) y / (2pi)^{3/2}
        double a = std::sqrt(2.0) * y / norm3;
        std::complex<double> cval = mode.sine ? std::complex<double>(0.0, -0.5 * a)
                                              : std::complex<double>(0.5 * a, 0.0);
        int cx = mode.xi[0], cy = mode.xi[1], cz = mode.xi[2];
        int my = cy >= 0 ? cy : cy + ng;
        int mz = cz >= 0 ? cz : cz + ng;
        for (int comp = 0; comp < 3; ++comp) {
            spec[comp].at(cx, my, mz) += cval * mode.pol[comp];
            if (cx == 0) {
                int myc = cy <= 0 ? -cy : ng - cy;
                int mzc = cz <= 0 ? -cz : ng - cz;
                spec[comp].at(0, myc, mzc) += std::conj(cval) * mode.pol[comp];
            }
        }
    }
    return to_physical(spec, g);
}

VectorField NoiseState::z_field(int channel, std::size_t n, const GridSpec& g) const {
    const VectorField& init = channel == 0 ? u0 : b0;
    VectorField det = heat_semigroup(init, times[n], alpha, nu);
    return det + convolution_field(channel, n, g);
}

VectorField NoiseState::z_truncated_field(int channel, std::size_t n, const GridSpec& g,
                                          double cutoff, bool* capped) const {
    const VectorField& init = channel == 0 ? u0 : b0;
    VectorField det = heat_semigroup(init, times[n], alpha, nu);
    VectorField zc = truncate_noise(convolution_field(channel, n, g), cutoff, capped);
    return det + zc;
}

VectorField truncate_noise(const VectorField& f, double cutoff, bool* capped) {
    double radius = cutoff;
    bool cap = false;
    if (radius >= f.grid.nyquist()) {
        radius = f.grid.nyquist();
        cap = true;
    }
    if (capped) *capped = cap;
    if (cap) return f;  // no-op on a band-limited sampled field
    return low_pass(f, radius);
}

// ------------------------------------------------------------ verification

RegularityReport verify_regularity(const NoiseModel& model, double alpha, double nu, double T,
                                   int n_steps, int n_paths) {
    if (n_paths < 1000) throw std::invalid_argument("verify_regularity: need >= 1000 paths");
    RegularityReport rep;
    const std::size_t nm = model.modes.size();
    const int check_modes = int(std::min<std::size_t>(nm, 8));
    std::vector<double> times(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) times[i] = T * i / n_steps;

    // Per-path simulation in coefficient space; channel 0 only (channel 1 is
    // the same construction with its own coefficients).
    CounterRng rng(model.seed ^ 0x5eedULL);
    std::vector<std::vector<double>> term(nm, std::vector<double>(times.size(), 0.0));

    // accumulators
    std::vector<double> mean_acc(check_modes, 0.0), var_acc(check_modes, 0.0);
    double inc_acc_12 = 0;  // E |Z(t1)-Z(t2)|^2 over the full mode set at two probes
    std::vector<int> gap_probes;
    for (int gap = 1; gap <= n_steps / 2; gap *= 2) gap_probes.push_back(gap);
    std::vector<double> inc_acc(gap_probes.size(), 0.0);
    std::vector<double> sup_norm(n_paths, 0.0);

    for (int path = 0; path < n_paths; ++path) {
        // evolve all modes
        double supn = 0;
        for (std::size_t m = 0; m < nm; ++m) {
            const NoiseMode& mode = model.modes[m];
            double mu = mode.mu(alpha, nu);
            double c = mode.coeff[0];
            auto& tm = term[m];
            tm[0] = 0.0;
            for (int n = 0; n < n_steps; ++n) {
                double dt = times[n + 1] - times[n];
                double decay = std::exp(-mu * dt);
                double sd = c * std::sqrt((1.0 - decay * decay) / (2.0 * mu));
                tm[n + 1] = decay * tm[n] + sd * rng.gaussian((std::uint64_t(path) << 24) | m, n);
            }
        }
        for (std::size_t n = 0; n < times.size(); ++n) {
            double s = 0;
            for (std::size_t m = 0; m < nm; ++m) s += term[m][n] * term[m][n];
            supn = std::max(supn, s);
        }
        sup_norm[path] = std::sqrt(supn);
        for (int m = 0; m < check_modes; ++m) {
            double v = term[m][n_steps];
            mean_acc[m] += v;
            var_acc[m] += v * v;
        }
        // increments of the full field at the midpoint
        int mid = n_steps / 2;
        for (std::size_t gi = 0; gi < gap_probes.size(); ++gi) {
            int other = mid + gap_probes[gi];
            if (other > n_steps) continue;
            double s = 0;
            for (std::size_t m = 0; m < nm; ++m) {
                double d = term[m][other] - term[m][mid];
                s += d * d;
            }
            inc_acc[gi] += s;
        }
        (void)inc_acc_12;
    }

    // marginal mean/variance against the closed form, in standard errors
    for (int m = 0; m < check_modes; ++m) {
        const NoiseMode& mode = model.modes[m];
        double mu = mode.mu(alpha, nu);
        double c = mode.coeff[0];
        double var_true = c * c * (1.0 - std::exp(-2.0 * mu * T)) / (2.0 * mu);
        double mean_hat = mean_acc[m] / n_paths;
        double var_hat = var_acc[m] / n_paths - mean_hat * mean_hat;
        double se_mean = std::sqrt(var_true / n_paths);
        double se_var = var_true * std::sqrt(2.0 / n_paths);
        rep.mean_dev_se = std::max(rep.mean_dev_se, std::abs(mean_hat) / se_mean);
        rep.var_dev_se = std::max(rep.var_dev_se, std::abs(var_hat - var_true) / se_var);
    }

    // increments: closed form E|Z(t1)-Z(t2)|^2 summed over modes
    std::vector<double> gaps, vals;
    int mid = n_steps / 2;
    for (std::size_t gi = 0; gi < gap_probes.size(); ++gi) {
        int other = mid + gap_probes[gi];
        if (other > n_steps) continue;
        double t2 = times[mid], t1 = times[other];
        double closed = 0, var_of_sq = 0;
        for (std::size_t m = 0; m < nm; ++m) {
            const NoiseMode& mode = model.modes[m];
            double mu = mode.mu(alpha, nu);
            double c2 = mode.coeff[0] * mode.coeff[0];
            double v1 = c2 * (1.0 - std::exp(-2.0 * mu * t1)) / (2.0 * mu);
            double v2 = c2 * (1.0 - std::exp(-2.0 * mu * t2)) / (2.0 * mu);
            double cov = c2 * std::exp(-mu * (t1 + t2)) * (std::exp(2.0 * mu * t2) - 1.0) / (2.0 * mu);
            double dv = v1 + v2 - 2.0 * cov;
            closed += dv;
            var_of_sq += 2.0 * dv * dv;  // Var of a squared gaussian increment
        }
        double mc = inc_acc[gi] / n_paths;
        double se = std::sqrt(var_of_sq / n_paths);
        rep.increment_mc_dev_se = std::max(rep.increment_mc_dev_se, std::abs(mc - closed) / se);
        gaps.push_back(t1 - t2);
        vals.push_back(closed);
    }
    // small-gap slope from the first half of the probes
    std::vector<double> gfit(gaps.begin(), gaps.begin() + (gaps.size() + 1) / 2);
    std::vector<double> vfit(vals.begin(), vals.begin() + (gaps.size() + 1) / 2);
    rep.increment_slope = fit_loglog_slope(gfit, vfit);

    // moment growth envelope on the sup norm
    double m2 = 0;
    for (double v : sup_norm) m2 += v * v;
    m2 /= n_paths;
    const double ps[3] = {2, 4, 8};
    for (int i = 0; i < 3; ++i) {
        double mp = 0;
        for (double v : sup_norm) mp += std::pow(v, ps[i]);
        mp /= n_paths;
        rep.moment_ratio[i] = m2 > 0 ? mp / std::pow(m2, ps[i] / 2.0) : 1.0;
        rep.moment_envelope[i] = std::pow(ps[i] - 1.0, ps[i] / 2.0) * 1.2;
    }
    return rep;
}

SmoothingFit verify_semigroup_smoothing(double alpha, double beta, double nu, int nyquist) {
    SmoothingFit fit;
    fit.alpha = alpha;
    fit.beta = beta;
    fit.expected = -beta / (2.0 * alpha);
    // choose t so the continuum maximizer radius r* = (beta/(2 alpha nu t))^{1/(2 alpha)}
    // sweeps [4, nyquist/2]
    auto t_for = [&](double rstar) { return beta / (2.0 * alpha * nu * std::pow(rstar, 2.0 * alpha)); };
    std::vector<double> ts, vals;
    for (double rstar = 4.0; rstar <= nyquist / 2.0; rstar *= std::pow(2.0, 0.25)) {
        double t = t_for(rstar);
        // lattice operator norm: max over radii present on the grid
        double best = 0;
        for (int x = 0; x <= nyquist; ++x)
            for (int y = 0; y <= x; ++y)
                for (int z = 0; z <= y; ++z) {
                    double k2 = double(x) * x + double(y) * y + double(z) * z;
                    if (k2 == 0 || k2 > double(nyquist) * nyquist) continue;
                    double v = std::pow(k2, beta / 2.0) * std::exp(-nu * t * std::pow(k2, alpha));
                    best = std::max(best, v);
                }
        ts.push_back(t);
        vals.push_back(best);
    }
    fit.slope = fit_loglog_slope(ts, vals);
    return fit;
}

}  // namespace tmhd
