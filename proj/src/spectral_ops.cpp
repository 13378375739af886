#include "tmhd/spectral_ops.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "tmhd/quadrature.hpp"

namespace tmhd {

// ---------------------------------------------------------------- transforms

Spectrum to_spectrum(const ScalarField& f) {
    Spectrum s(f.grid.n_per_axis);
    FftEngine::get(s.n).forward(f.values.data(), s.c.data());
    return s;
}

ScalarField to_physical(const Spectrum& s, const GridSpec& g) {
    if (s.n != g.n_per_axis) throw std::invalid_argument("to_physical: grid mismatch");
    ScalarField f(g);
    FftEngine::get(s.n).inverse(s.c.data(), f.values.data());
    return f;
}

std::array<Spectrum, 3> to_spectrum(const VectorField& f) {
    return {to_spectrum(f.comp[0]), to_spectrum(f.comp[1]), to_spectrum(f.comp[2])};
}

VectorField to_physical(const std::array<Spectrum, 3>& s, const GridSpec& g) {
    VectorField f(g);
    for (int c = 0; c < 3; ++c) f.comp[c] = to_physical(s[c], g);
    return f;
}

namespace {

// First-derivative wave number: the Nyquist plane gets no odd-derivative
// contribution (standard choice; synthesized fields never populate it).
inline double dwave(int k, int n) { return (k == n / 2 || k == -n / 2) ? 0.0 : k; }

struct VecSpec {
    std::array<Spectrum, 3> s;
    int n;
};

VecSpec vec_spec(const VectorField& f) { return {to_spectrum(f), f.grid.n_per_axis}; }

template <class Fn>
void for_modes(int n, Fn&& fn) {
    const int nh = n / 2 + 1;
    std::size_t idx = 0;
    for (int mz = 0; mz < n; ++mz) {
        const int kz = wavenumber(mz, n);
        for (int my = 0; my < n; ++my) {
            const int ky = wavenumber(my, n);
            for (int kx = 0; kx < nh; ++kx) fn(idx++, kx, ky, kz);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- operators

ScalarField frac_laplacian(const ScalarField& f, double alpha) {
    if (alpha < 0) throw std::invalid_argument("frac_laplacian: alpha must be >= 0");
    Spectrum s = to_spectrum(f);
    apply_multiplier(s, [alpha](int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        return k2 == 0.0 ? 0.0 : std::pow(k2, alpha);
    });
    return to_physical(s, f.grid);
}

VectorField frac_laplacian(const VectorField& f, double alpha) {
    VectorField out(f.grid);
    for (int c = 0; c < 3; ++c) out.comp[c] = frac_laplacian(f.comp[c], alpha);
    return out;
}

VectorField leray_project(const VectorField& f) {
    // The projector uses the same Nyquist-zeroed wave numbers as the
    // first-derivative operators, so div o leray vanishes identically on any
    // grid data, aliased content included.
    auto s = to_spectrum(f);
    const int n = f.grid.n_per_axis;
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        double w[3] = {dwave(kx, n), dwave(ky, n), dwave(kz, n)};
        double k2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        if (k2 == 0.0) return;  // mean and pure-Nyquist modes untouched
        std::complex<double> kdotv = w[0] * s[0].c[idx] + w[1] * s[1].c[idx] + w[2] * s[2].c[idx];
        s[0].c[idx] -= w[0] * kdotv / k2;
        s[1].c[idx] -= w[1] * kdotv / k2;
        s[2].c[idx] -= w[2] * kdotv / k2;
    });
    return to_physical(s, f.grid);
}

VectorField tensor_divergence(const TensorField& a) {
    const int n = a.grid.n_per_axis;
    VectorField out(a.grid);
    for (int i = 0; i < 3; ++i) {
        std::array<Spectrum, 3> row = {to_spectrum(a.at(i, 0)), to_spectrum(a.at(i, 1)),
                                       to_spectrum(a.at(i, 2))};
        Spectrum acc(n);
        for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
            std::complex<double> im(0.0, 1.0);
            acc.c[idx] = im * (dwave(kx, n) * row[0].c[idx] + dwave(ky, n) * row[1].c[idx] +
                               dwave(kz, n) * row[2].c[idx]);
        });
        out.comp[i] = to_physical(acc, a.grid);
    }
    return out;
}

ScalarField divergence(const VectorField& f) {
    const int n = f.grid.n_per_axis;
    auto s = to_spectrum(f);
    Spectrum acc(n);
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        std::complex<double> im(0.0, 1.0);
        acc.c[idx] =
            im * (dwave(kx, n) * s[0].c[idx] + dwave(ky, n) * s[1].c[idx] + dwave(kz, n) * s[2].c[idx]);
    });
    return to_physical(acc, f.grid);
}

VectorField gradient(const ScalarField& f) {
    const int n = f.grid.n_per_axis;
    Spectrum s = to_spectrum(f);
    std::array<Spectrum, 3> g = {Spectrum(n), Spectrum(n), Spectrum(n)};
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        std::complex<double> im(0.0, 1.0);
        g[0].c[idx] = im * dwave(kx, n) * s.c[idx];
        g[1].c[idx] = im * dwave(ky, n) * s.c[idx];
        g[2].c[idx] = im * dwave(kz, n) * s.c[idx];
    });
    return to_physical(g, f.grid);
}

VectorField curl(const VectorField& f) {
    const int n = f.grid.n_per_axis;
    auto s = to_spectrum(f);
    std::array<Spectrum, 3> out = {Spectrum(n), Spectrum(n), Spectrum(n)};
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        std::complex<double> im(0.0, 1.0);
        double wx = dwave(kx, n), wy = dwave(ky, n), wz = dwave(kz, n);
        out[0].c[idx] = im * (wy * s[2].c[idx] - wz * s[1].c[idx]);
        out[1].c[idx] = im * (wz * s[0].c[idx] - wx * s[2].c[idx]);
        out[2].c[idx] = im * (wx * s[1].c[idx] - wy * s[0].c[idx]);
    });
    return to_physical(out, f.grid);
}

TensorField inv_div_sym(const VectorField& v, double mean_tol) {
    for (int c = 0; c < 3; ++c)
        if (std::abs(v.comp[c].mean()) > mean_tol)
            throw std::invalid_argument("inv_div_sym: input must be mean-free");
    const int n = v.grid.n_per_axis;
    auto s = to_spectrum(v);
    std::array<Spectrum, 9> t;
    t.fill(Spectrum(n));
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        double w[3] = {dwave(kx, n), dwave(ky, n), dwave(kz, n)};
        double k2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        if (k2 == 0.0) return;  // Delta^{-1} is zero on the mean mode
        std::complex<double> im(0.0, 1.0);
        std::complex<double> vv[3] = {s[0].c[idx], s[1].c[idx], s[2].c[idx]};
        std::complex<double> kdotv = w[0] * vv[0] + w[1] * vv[1] + w[2] * vv[2];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                std::complex<double> val = -im * (w[i] * vv[j] + w[j] * vv[i]) / k2;
                double proj = (i == j ? 1.0 : 0.0) + w[i] * w[j] / k2;
                val += 0.5 * proj * im * kdotv / k2;
                t[3 * i + j].c[idx] = val;
            }
    });
    TensorField out(v.grid, TensorSymmetry::symmetric_tracefree);
    for (int c = 0; c < 9; ++c) out.comp[c] = to_physical(t[c], v.grid);
    return out;
}

TensorField inv_div_skew(const VectorField& f, double div_tol) {
    double dn = divergence_l2(f);
    double scale = std::max(1.0, lp_norm(f, 2.0));
    if (dn > div_tol * scale)
        throw std::invalid_argument("inv_div_skew: input must be divergence-free (|div|_2 = " +
                                    std::to_string(dn) + ")");
    const int n = f.grid.n_per_axis;
    auto s = to_spectrum(f);
    std::array<Spectrum, 9> t;
    t.fill(Spectrum(n));
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        double w[3] = {dwave(kx, n), dwave(ky, n), dwave(kz, n)};
        double k2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        if (k2 == 0.0) return;
        std::complex<double> im(0.0, 1.0);
        std::complex<double> vv[3] = {s[0].c[idx], s[1].c[idx], s[2].c[idx]};
        // curl f then (-Delta)^{-1}
        std::complex<double> cf[3] = {im * (w[1] * vv[2] - w[2] * vv[1]) / k2,
                                      im * (w[2] * vv[0] - w[0] * vv[2]) / k2,
                                      im * (w[0] * vv[1] - w[1] * vv[0]) / k2};
        // (R^B f)_{ij} = eps_{ijk} cf_k
        t[3 * 0 + 1].c[idx] = cf[2];
        t[3 * 1 + 0].c[idx] = -cf[2];
        t[3 * 1 + 2].c[idx] = cf[0];
        t[3 * 2 + 1].c[idx] = -cf[0];
        t[3 * 2 + 0].c[idx] = cf[1];
        t[3 * 0 + 2].c[idx] = -cf[1];
    });
    TensorField out(f.grid, TensorSymmetry::skew);
    for (int c = 0; c < 9; ++c) out.comp[c] = to_physical(t[c], f.grid);
    return out;
}

double divergence_l2(const VectorField& f) { return lp_norm(divergence(f), 2.0); }

double inv_grad_l2(const VectorField& f) {
    auto s = to_spectrum(f);
    const int n = f.grid.n_per_axis;
    double sum = 0;
    for_modes(n, [&](std::size_t idx, int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        if (k2 == 0.0) return;
        // kx=0 and kx=n/2 planes represent a single mode, others carry the pair
        double mult = (kx == 0 || kx == n / 2) ? 1.0 : 2.0;
        double mag2 = std::norm(s[0].c[idx]) + std::norm(s[1].c[idx]) + std::norm(s[2].c[idx]);
        sum += mult * mag2 / k2;
    });
    return std::sqrt(sum * kTwoPi * kTwoPi * kTwoPi);
}

namespace {
ScalarField radial_cut(const ScalarField& f, double radius, bool keep_below) {
    Spectrum s = to_spectrum(f);
    double r2 = radius * radius;
    apply_multiplier(s, [&](int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        bool below = k2 <= r2;
        return (below == keep_below) ? 1.0 : 0.0;
    });
    return to_physical(s, f.grid);
}
}  // namespace

ScalarField low_pass(const ScalarField& f, double radius) { return radial_cut(f, radius, true); }
VectorField low_pass(const VectorField& f, double radius) {
    VectorField out(f.grid);
    for (int c = 0; c < 3; ++c) out.comp[c] = low_pass(f.comp[c], radius);
    return out;
}
ScalarField high_pass(const ScalarField& f, double radius) {
    Spectrum s = to_spectrum(f);
    double r2 = radius * radius;
    apply_multiplier(s, [&](int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        return k2 >= r2 ? 1.0 : 0.0;
    });
    return to_physical(s, f.grid);
}

ScalarField remove_mean(const ScalarField& f) {
    ScalarField out = f;
    double m = f.mean();
    for (double& v : out.values) v -= m;
    return out;
}
VectorField remove_mean(const VectorField& f) {
    VectorField out(f.grid);
    for (int c = 0; c < 3; ++c) out.comp[c] = remove_mean(f.comp[c]);
    return out;
}

// ---------------------------------------------------------------- mollifiers

namespace {

double bump_unit(double r) {  // exp(-1/(1-r^2)) on (-1,1)
    double s = 1.0 - r * r;
    return s > 0 ? std::exp(-1.0 / s) : 0.0;
}

double bump3_mass() {
    static const double m = 4.0 * M_PI * integrate([](double r) { return r * r * bump_unit(r); }, 0.0, 1.0);
    return m;
}

}  // namespace

double space_kernel_symbol(double k) {
    if (k == 0.0) return 1.0;
    double val = 4.0 * M_PI *
                 integrate([k](double r) { return r * r * bump_unit(r) * (std::sin(k * r) / (k * r)); },
                           0.0, 1.0);
    return val / bump3_mass();
}

namespace {

const std::vector<double>& symbol_table(int n, double ell) {
    static std::map<std::pair<int, long long>, std::vector<double>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, static_cast<long long>(ell * 1e12));
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    int kmax2 = 3 * (n / 2) * (n / 2);
    std::vector<double> tab(kmax2 + 1, 1.0);
    for (int k2 = 1; k2 <= kmax2; ++k2) tab[k2] = space_kernel_symbol(ell * std::sqrt(double(k2)));
    return cache.emplace(key, std::move(tab)).first->second;
}

}  // namespace

ScalarField mollify_space(const ScalarField& f, double ell) {
    if (ell <= 0) throw std::invalid_argument("mollify_space: ell must be > 0");
    if (ell < f.grid.spacing())
        throw std::invalid_argument("mollify_space: kernel width below grid spacing");
    const auto& tab = symbol_table(f.grid.n_per_axis, ell);
    Spectrum s = to_spectrum(f);
    apply_multiplier(s, [&](int kx, int ky, int kz) {
        int k2 = kx * kx + ky * ky + kz * kz;
        return tab[k2];
    });
    return to_physical(s, f.grid);
}

VectorField mollify_space(const VectorField& f, double ell) {
    VectorField out(f.grid);
    for (int c = 0; c < 3; ++c) out.comp[c] = mollify_space(f.comp[c], ell);
    return out;
}
TensorField mollify_space(const TensorField& f, double ell) {
    TensorField out(f.grid, f.symmetry);
    for (int c = 0; c < 9; ++c) out.comp[c] = mollify_space(f.comp[c], ell);
    return out;
}

std::vector<double> time_mollifier_weights(double ell, double dt) {
    if (ell <= 0 || dt <= 0) throw std::invalid_argument("time_mollifier_weights: bad arguments");
    if (ell < dt) throw std::invalid_argument("time_mollifier_weights: ell below time spacing");
    int kmax = static_cast<int>(std::ceil(ell / dt));
    std::vector<double> w(kmax + 1, 0.0);
    double sum = 0;
    for (int j = 0; j <= kmax; ++j) {
        double s = j * dt / ell;          // in [0, 1]
        double r = 2.0 * s - 1.0;         // bump centered inside [0,1]
        w[j] = bump_unit(r);
        sum += w[j];
    }
    if (sum <= 0) throw std::runtime_error("time_mollifier_weights: degenerate kernel");
    for (double& v : w) v /= sum;
    return w;
}

namespace {
template <class FieldT>
TimeSeries<FieldT> mollify_time_impl(const TimeSeries<FieldT>& f, double ell) {
    if (f.size() < 2) throw std::invalid_argument("mollify_time: need at least two frames");
    double dt = f.times[1] - f.times[0];
    for (std::size_t i = 1; i < f.size(); ++i)
        if (std::abs(f.times[i] - f.times[i - 1] - dt) > 1e-12 * dt)
            throw std::invalid_argument("mollify_time: time grid must be uniform");
    auto w = time_mollifier_weights(ell, dt);
    TimeSeries<FieldT> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
        FieldT acc = 0.0 * f.frames[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (j > i) break;  // frames before t=0 are zero
            acc = acc + w[j] * f.frames[i - j];
        }
        out.push(f.times[i], std::move(acc));
    }
    return out;
}
}  // namespace

TimeSeriesVector mollify_time(const TimeSeriesVector& f, double ell) { return mollify_time_impl(f, ell); }
TimeSeriesTensor mollify_time(const TimeSeriesTensor& f, double ell) { return mollify_time_impl(f, ell); }

// ---------------------------------------------------------------- norms

namespace {
double lp_from_magnitudes(const std::vector<double>& mags2, const GridSpec& g, double p) {
    const double cell = kTwoPi * kTwoPi * kTwoPi / static_cast<double>(g.points());
    if (std::isinf(p)) {
        double m = 0;
        for (double v : mags2) m = std::max(m, v);
        return std::sqrt(m);
    }
    double acc = 0;
    for (double v : mags2) acc += std::pow(v, p / 2.0);
    return std::pow(acc * cell, 1.0 / p);
}
}  // namespace

double lp_norm(const ScalarField& f, double p) {
    if (p < 1) throw std::invalid_argument("lp_norm: p must be >= 1");
    std::vector<double> m2(f.values.size());
    for (std::size_t i = 0; i < m2.size(); ++i) m2[i] = f.values[i] * f.values[i];
    return lp_from_magnitudes(m2, f.grid, p);
}

double lp_norm(const VectorField& f, double p) {
    std::vector<double> m2(f.grid.points(), 0.0);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < m2.size(); ++i)
            m2[i] += f.comp[c].values[i] * f.comp[c].values[i];
    return lp_from_magnitudes(m2, f.grid, p);
}

double lp_norm(const TensorField& f, double p) {
    std::vector<double> m2(f.grid.points(), 0.0);
    for (int c = 0; c < 9; ++c)
        for (std::size_t i = 0; i < m2.size(); ++i)
            m2[i] += f.comp[c].values[i] * f.comp[c].values[i];
    return lp_from_magnitudes(m2, f.grid, p);
}

namespace {

ScalarField bessel(const ScalarField& f, double s) {
    Spectrum sp = to_spectrum(f);
    apply_multiplier(sp, [s](int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        return std::pow(1.0 + k2, s / 2.0);
    });
    return to_physical(sp, f.grid);
}

// All |zeta| = m derivatives of each input component, appended to comps.
std::vector<ScalarField> derivatives_of_order(const std::vector<ScalarField>& base, int m) {
    std::vector<ScalarField> cur = base;
    for (int step = 0; step < m; ++step) {
        std::vector<ScalarField> next;
        for (const auto& f : cur) {
            VectorField g = gradient(f);
            for (int c = 0; c < 3; ++c) next.push_back(g.comp[c]);
        }
        cur = std::move(next);
    }
    return cur;
}

double lp_of_group(const std::vector<ScalarField>& comps, double p) {
    std::vector<double> m2(comps.front().values.size(), 0.0);
    for (const auto& f : comps)
        for (std::size_t i = 0; i < m2.size(); ++i) m2[i] += f.values[i] * f.values[i];
    return lp_from_magnitudes(m2, comps.front().grid, p);
}

double sobolev_impl(const std::vector<ScalarField>& comps, double s, double p) {
    if (s < 0) throw std::invalid_argument("sobolev_norm: s must be >= 0");
    double si;
    if (std::modf(s, &si) == 0.0) {
        double total = 0;
        for (int m = 0; m <= static_cast<int>(si); ++m)
            total += lp_of_group(derivatives_of_order(comps, m), p);
        return total;
    }
    std::vector<ScalarField> b;
    for (const auto& f : comps) b.push_back(bessel(f, s));
    return lp_of_group(b, p);
}

}  // namespace

double sobolev_norm(const ScalarField& f, double s, double p) { return sobolev_impl({f}, s, p); }
double sobolev_norm(const VectorField& f, double s, double p) {
    return sobolev_impl({f.comp[0], f.comp[1], f.comp[2]}, s, p);
}

double spectral_energy(const ScalarField& f) {
    Spectrum s = to_spectrum(f);
    const int n = s.n;
    double sum = 0;
    std::size_t idx = 0;
    for (int mz = 0; mz < n; ++mz)
        for (int my = 0; my < n; ++my)
            for (int kx = 0; kx <= n / 2; ++kx) {
                double mult = (kx == 0 || kx == n / 2) ? 1.0 : 2.0;
                sum += mult * std::norm(s.c[idx++]);
            }
    return sum * kTwoPi * kTwoPi * kTwoPi;
}

// ---------------------------------------------------------------- products

ScalarField dealiased_product(const ScalarField& a, const ScalarField& b) {
    if (a.grid != b.grid) throw std::invalid_argument("dealiased_product: grid mismatch");
    const int n = a.grid.n_per_axis;
    int np = static_cast<int>(std::ceil(n * a.grid.dealias_factor));
    if (np & 1) ++np;
    Spectrum sa = to_spectrum(a), sb = to_spectrum(b);

    auto embed = [&](const Spectrum& src) {
        Spectrum dst(np);
        for (int mz = 0; mz < n; ++mz) {
            int kz = wavenumber(mz, n);
            if (std::abs(kz) >= n / 2) continue;  // drop the Nyquist plane
            int mzp = kz >= 0 ? kz : kz + np;
            for (int my = 0; my < n; ++my) {
                int ky = wavenumber(my, n);
                if (std::abs(ky) >= n / 2) continue;
                int myp = ky >= 0 ? ky : ky + np;
                for (int kx = 0; kx < n / 2; ++kx) dst.at(kx, myp, mzp) = src.at(kx, my, mz);
            }
        }
        return dst;
    };

    GridSpec gp(np, 1.0);
    ScalarField pa = to_physical(embed(sa), gp);
    ScalarField pb = to_physical(embed(sb), gp);
    ScalarField prod = pa * pb;
    Spectrum sp = to_spectrum(prod);

    Spectrum out(n);
    for (int mz = 0; mz < n; ++mz) {
        int kz = wavenumber(mz, n);
        if (std::abs(kz) >= n / 2) continue;
        int mzp = kz >= 0 ? kz : kz + np;
        for (int my = 0; my < n; ++my) {
            int ky = wavenumber(my, n);
            if (std::abs(ky) >= n / 2) continue;
            int myp = ky >= 0 ? ky : ky + np;
            for (int kx = 0; kx < n / 2; ++kx) out.at(kx, my, mz) = sp.at(kx, myp, mzp);
        }
    }
    return to_physical(out, a.grid);
}

}  // namespace tmhd
