#include "tmhd/convex_step.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tmhd/profiles.hpp"
#include "tmhd/spectral_ops.hpp"

namespace tmhd {

namespace {

constexpr std::size_t kMollCacheCap = 12;
constexpr std::size_t kAmpCacheCap = 12;
constexpr std::size_t kPertCacheCap = 10;

VectorField curlcurl_spectral(const VectorField& v) {
    // curl curl = grad div - Delta, exact in the discrete symbols
    auto s = to_spectrum(v);
    const int n = v.grid.n_per_axis;
    std::array<Spectrum, 3> out = {Spectrum(n), Spectrum(n), Spectrum(n)};
    const int nh = n / 2 + 1;
    std::size_t idx = 0;
    for (int mz = 0; mz < n; ++mz) {
        int kz = wavenumber(mz, n);
        for (int my = 0; my < n; ++my) {
            int ky = wavenumber(my, n);
            for (int kx = 0; kx < nh; ++kx, ++idx) {
                double w[3] = {double(kx == n / 2 ? 0 : kx), double(std::abs(ky) == n / 2 ? 0 : ky),
                               double(std::abs(kz) == n / 2 ? 0 : kz)};
                double k2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
                std::complex<double> kdotv =
                    w[0] * s[0].c[idx] + w[1] * s[1].c[idx] + w[2] * s[2].c[idx];
                for (int c = 0; c < 3; ++c) out[c].c[idx] = k2 * s[c].c[idx] - w[c] * kdotv;
            }
        }
    }
    return to_physical(out, v.grid);
}

TensorField ordered_outer(const VectorField& x, const VectorField& y, bool traceless) {
    return traceless ? outer_product_traceless(x, y) : outer_product(x, y);
}

// X (x) y + y (x) X, traceless variant
TensorField sym_pair(const VectorField& x, const VectorField& y) {
    return outer_product_traceless(x, y) + outer_product_traceless(y, x);
}

// X (x) y - y (x) X
TensorField skew_pair(const VectorField& x, const VectorField& y) {
    return outer_product(x, y) - outer_product(y, x);
}

VectorField scaled(const VectorField& v, double s) { return s * v; }

void retag(TensorField& t, TensorSymmetry s) { t.symmetry = s; }

}  // namespace

std::vector<std::pair<long, double>> time_stencil(std::size_t n, std::size_t count, double dt) {
    const double f = 1.0 / (12.0 * dt);
    if (count < 5) throw std::invalid_argument("time_stencil: need at least five frames");
    if (n >= 2 && n + 2 < count)
        return {{-2, f}, {-1, -8 * f}, {1, 8 * f}, {2, -f}};
    if (n == 0) return {{0, -25 * f}, {1, 48 * f}, {2, -36 * f}, {3, 16 * f}, {4, -3 * f}};
    if (n == 1) return {{-1, -3 * f}, {0, -10 * f}, {1, 18 * f}, {2, -6 * f}, {3, f}};
    if (n + 2 == count) return {{1, 3 * f}, {0, 10 * f}, {-1, -18 * f}, {-2, 6 * f}, {-3, -f}};
    return {{0, 25 * f}, {-1, -48 * f}, {-2, 36 * f}, {-3, -16 * f}, {-4, 3 * f}};
}

VectorField RelaxedState::z_q(int channel, std::size_t n) const {
    return noise->z_truncated_field(channel, n, grid, noise_cutoff);
}

// --------------------------------------------------------------- q = 0

namespace {

class InitialSource : public FrameSource {
  public:
    InitialSource(AnalyticVectorField v, AnalyticVectorField h,
                  std::shared_ptr<const NoiseState> noise, IterParams params, GridSpec grid,
                  std::vector<double> times, double cutoff)
        : v_(std::move(v)),
          h_(std::move(h)),
          noise_(std::move(noise)),
          params_(params),
          grid_(grid),
          times_(std::move(times)),
          cutoff_(cutoff) {}

    std::shared_ptr<const RelaxedFrame> frame(std::size_t n) const override {
        auto it = cache_.find(n);
        if (it != cache_.end()) return it->second;
        auto f = std::make_shared<RelaxedFrame>(build(n));
        while (cache_.size() > 20) cache_.erase(cache_.begin());
        cache_.emplace(n, f);
        return f;
    }
    VectorField velocity(std::size_t n) const override { return v_(times_[n], grid_); }
    VectorField magnetic(std::size_t n) const override { return h_(times_[n], grid_); }

  private:
    RelaxedFrame build(std::size_t n) const {
        const GridSpec& g = grid_;
        double t = times_[n];
        RelaxedFrame fr;
        fr.u = v_(t, g);
        fr.b = h_(t, g);
        VectorField z1 = noise_->z_truncated_field(0, n, g, cutoff_);
        VectorField z2 = noise_->z_truncated_field(1, n, g, cutoff_);

        // time derivatives with the shared stencil, so the q = 0 residual
        // closes to roundoff
        VectorField dv(g), dh(g);
        double dt = times_[1] - times_[0];
        for (auto [off, wgt] : time_stencil(n, times_.size(), dt)) {
            double ts = times_[n + off];
            dv = dv + scaled(v_(ts, g), wgt);
            dh = dh + scaled(h_(ts, g), wgt);
        }
        double alpha = params_.alpha, nu = params_.nu;
        VectorField arg_u = dv + scaled(frac_laplacian(fr.u, alpha), nu) - z1;
        VectorField arg_b = dh + scaled(frac_laplacian(fr.b, alpha), nu) - z2;
        VectorField up = fr.u + z1;
        VectorField bp = fr.b + z2;
        fr.ru = inv_div_sym(arg_u) + outer_product_traceless(up, up) -
                outer_product_traceless(bp, bp);
        retag(fr.ru, TensorSymmetry::symmetric_tracefree);
        fr.rb = inv_div_skew(arg_b) + skew_pair(bp, up);
        retag(fr.rb, TensorSymmetry::skew);
        return fr;
    }

    AnalyticVectorField v_, h_;
    std::shared_ptr<const NoiseState> noise_;
    IterParams params_;
    GridSpec grid_;
    std::vector<double> times_;
    double cutoff_;
    mutable std::map<std::size_t, std::shared_ptr<const RelaxedFrame>> cache_;
};

}  // namespace

RelaxedState init_state(const AnalyticVectorField& v, const AnalyticVectorField& h,
                        std::shared_ptr<const NoiseState> noise, const IterParams& params,
                        const GridSpec& grid, const std::vector<double>& times,
                        std::shared_ptr<const GeometricBasis> basis) {
    if (times.size() < 8) throw std::invalid_argument("init_state: time grid too short");
    RelaxedState st;
    st.q = params.q;
    st.params = params;
    st.grid = grid;
    st.times = times;
    st.basis = std::move(basis);
    st.noise = std::move(noise);
    double cutoff = std::pow(params.lambda_q, 15.0);
    st.noise_capped = cutoff >= grid.nyquist();
    st.noise_cutoff = std::min(cutoff, double(grid.nyquist()));

    // preconditions: divergence-free, mean-free, vanishing at t = 0
    VectorField v0 = v(times.front(), grid), h0 = h(times.front(), grid);
    if (max_abs(v0) > 1e-12 || max_abs(h0) > 1e-12)
        throw std::invalid_argument("init_state: fields must vanish at t = 0");
    VectorField vm = v(times[times.size() / 2], grid), hm = h(times[times.size() / 2], grid);
    for (const VectorField* f : {&vm, &hm}) {
        if (divergence_l2(*f) > 1e-8 * std::max(1.0, lp_norm(*f, 2.0)))
            throw std::invalid_argument("init_state: fields must be divergence-free");
        for (int c = 0; c < 3; ++c)
            if (std::abs(f->comp[c].mean()) > 1e-10)
                throw std::invalid_argument("init_state: fields must be mean-free");
    }

    st.fields = std::make_shared<InitialSource>(v, h, st.noise, params, grid, times,
                                                st.noise_cutoff);
    return st;
}

// ---------------------------------------------------------------- residual

ResidualReport residual_check(const RelaxedState& state, std::vector<std::size_t> test_indices) {
    if (test_indices.empty()) throw std::invalid_argument("residual_check: no test indices");
    ResidualReport rep;
    rep.tested = test_indices;
    const GridSpec& g = state.grid;
    double alpha = state.params.alpha, nu = state.params.nu;
    for (std::size_t n : test_indices) {
        if (n >= state.times.size()) throw std::invalid_argument("residual_check: index range");
        if (n < 2 || n + 2 >= state.times.size()) rep.boundary_stencils = true;
        auto stencil = time_stencil(n, state.times.size(), state.dt());
        VectorField du(g), db(g);
        for (auto [off, wgt] : stencil) {
            du = du + scaled(state.fields->velocity(n + off), wgt);
            db = db + scaled(state.fields->magnetic(n + off), wgt);
        }
        auto fr = state.fields->frame(n);
        VectorField z1 = state.z_q(0, n), z2 = state.z_q(1, n);
        VectorField up = fr->u + z1, bp = fr->b + z2;
        TensorField xu = outer_product(up, up) - outer_product(bp, bp);
        TensorField xb = outer_product(bp, up) - outer_product(up, bp);
        VectorField eq_u =
            du + scaled(frac_laplacian(fr->u, alpha), nu) - z1 + tensor_divergence(xu) -
            tensor_divergence(fr->ru);
        VectorField eq_b =
            db + scaled(frac_laplacian(fr->b, alpha), nu) - z2 + tensor_divergence(xb) -
            tensor_divergence(fr->rb);
        rep.res_u = std::max(rep.res_u, inv_grad_l2(leray_project(eq_u)));
        rep.res_b = std::max(rep.res_b, inv_grad_l2(eq_b));
        rep.field_scale = std::max({rep.field_scale, max_abs(fr->u), max_abs(fr->b), max_abs(z1)});
    }
    return rep;
}

// ---------------------------------------------------------------- pipeline

StepPipeline::StepPipeline(const RelaxedState& state)
    : state_(state),
      flows_(build_shear_flows(*state.basis, state.params, state.grid)),
      blocks_(build_temporal_blocks(state.basis->total_frames(), state.params,
                                    state.params.T)) {
    moll_weights_ = time_mollifier_weights(state.params.ell, state.dt());
    const GeometricBasis& basis = *state_.basis;
    for (std::size_t i = 0; i < basis.total_frames(); ++i) {
        double phi2 = 0;
        for (double v : flows_.phi[i].values) phi2 += v * v;
        phi2 /= double(flows_.phi[i].values.size());
        const WaveVectorFrame& f = basis.frame(i);
        mean_ww_.push_back(outer(f.k1d, f.k1d) * phi2);
        if (!basis.is_velocity_family(i)) {
            mean_dd_.push_back(outer(f.k2d, f.k2d) * phi2);
            mean_dw_.push_back((outer(f.k2d, f.k1d) - outer(f.k1d, f.k2d)) * phi2);
        } else {
            mean_dd_.push_back(Mat3{});
            mean_dw_.push_back(Mat3{});
        }
    }
}

double StepPipeline::theta(double t) const {
    double vs = state_.params.varsigma;
    return smoothstep01((t - 0.5 * vs) / (0.5 * vs));
}

double StepPipeline::theta_dt(double t) const {
    double vs = state_.params.varsigma;
    double u = (t - 0.5 * vs) / (0.5 * vs);
    if (u <= 0.0 || u >= 1.0) return 0.0;
    double fa = std::exp(-1.0 / u), fb = std::exp(-1.0 / (1.0 - u));
    double m = fa + fb;
    double num = fa * fb * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u)));
    return num / (m * m) / (0.5 * vs);
}

void StepPipeline::trim_caches() const {
    auto trim = [](auto& cache, std::size_t cap) {
        while (cache.size() > cap) cache.erase(cache.begin());
    };
    trim(moll_cache_, kMollCacheCap);
    trim(amp_cache_, kAmpCacheCap);
    trim(pert_cache_, kPertCacheCap);
}

std::shared_ptr<const RelaxedFrame> StepPipeline::mollified(std::size_t n) const {
    auto it = moll_cache_.find(n);
    if (it != moll_cache_.end()) return it->second;
    const GridSpec& g = state_.grid;
    auto out = std::make_shared<RelaxedFrame>();
    out->u = VectorField(g);
    out->b = VectorField(g);
    out->ru = TensorField(g, TensorSymmetry::symmetric_tracefree);
    out->rb = TensorField(g, TensorSymmetry::skew);
    for (std::size_t j = 0; j < moll_weights_.size(); ++j) {
        if (j > n) break;  // frames before t = 0 are zero
        auto fr = state_.fields->frame(n - j);
        double w = moll_weights_[j];
        out->u = out->u + scaled(fr->u, w);
        out->b = out->b + scaled(fr->b, w);
        for (int c = 0; c < 9; ++c) {
            for (std::size_t p = 0; p < out->ru.comp[c].values.size(); ++p) {
                out->ru.comp[c].values[p] += w * fr->ru.comp[c].values[p];
                out->rb.comp[c].values[p] += w * fr->rb.comp[c].values[p];
            }
        }
    }
    // spatial part
    out->u = mollify_space(out->u, state_.params.ell);
    out->b = mollify_space(out->b, state_.params.ell);
    out->ru = mollify_space(out->ru, state_.params.ell);
    out->rb = mollify_space(out->rb, state_.params.ell);
    moll_cache_.emplace(n, out);
    trim_caches();
    return out;
}

VectorField StepPipeline::z_moll(int channel, std::size_t n) const {
    const GridSpec& g = state_.grid;
    VectorField acc(g);
    for (std::size_t j = 0; j < moll_weights_.size(); ++j) {
        if (j > n) break;
        acc = acc + scaled(state_.z_q(channel, n - j), moll_weights_[j]);
    }
    return mollify_space(acc, state_.params.ell);
}

VectorField StepPipeline::z_next(int channel, std::size_t n) const {
    double cutoff = std::min(std::pow(state_.params.lambda, 15.0), double(state_.grid.nyquist()));
    return state_.noise->z_truncated_field(channel, n, state_.grid, cutoff);
}

TensorField StepPipeline::commutator_stress_u(std::size_t n) const {
    const GridSpec& g = state_.grid;
    // mollification of the level-q traceless products
    TensorField mprod(g, TensorSymmetry::symmetric_tracefree);
    for (std::size_t j = 0; j < moll_weights_.size(); ++j) {
        if (j > n) break;
        auto fr = state_.fields->frame(n - j);
        VectorField up = fr->u + state_.z_q(0, n - j);
        VectorField bp = fr->b + state_.z_q(1, n - j);
        TensorField prod =
            outer_product_traceless(up, up) - outer_product_traceless(bp, bp);
        mprod = mprod + moll_weights_[j] * prod;
    }
    mprod = mollify_space(mprod, state_.params.ell);
    auto ml = mollified(n);
    VectorField ul = ml->u + z_moll(0, n);
    VectorField bl = ml->b + z_moll(1, n);
    TensorField out = outer_product_traceless(ul, ul) - outer_product_traceless(bl, bl) - mprod;
    retag(out, TensorSymmetry::symmetric_tracefree);
    return out;
}

TensorField StepPipeline::commutator_stress_b(std::size_t n) const {
    const GridSpec& g = state_.grid;
    TensorField mprod(g, TensorSymmetry::skew);
    for (std::size_t j = 0; j < moll_weights_.size(); ++j) {
        if (j > n) break;
        auto fr = state_.fields->frame(n - j);
        VectorField up = fr->u + state_.z_q(0, n - j);
        VectorField bp = fr->b + state_.z_q(1, n - j);
        mprod = mprod + moll_weights_[j] * skew_pair(bp, up);
    }
    mprod = mollify_space(mprod, state_.params.ell);
    auto ml = mollified(n);
    VectorField ul = ml->u + z_moll(0, n);
    VectorField bl = ml->b + z_moll(1, n);
    TensorField out = skew_pair(bl, ul) - mprod;
    retag(out, TensorSymmetry::skew);
    return out;
}

std::shared_ptr<const StepPipeline::AmplitudeFrame> StepPipeline::amplitudes(std::size_t n) const {
    auto it = amp_cache_.find(n);
    if (it != amp_cache_.end()) return it->second;
    auto ml = mollified(n);
    auto out = std::make_shared<AmplitudeFrame>();
    out->mag = magnetic_amplitudes(ml->rb, state_.params.delta_next, *state_.basis);
    out->gb = gb_matrix(out->mag, flows_);
    out->vel = velocity_amplitudes(ml->ru, out->gb, state_.params.delta_next, *state_.basis);
    amp_cache_.emplace(n, out);
    trim_caches();
    return out;
}

std::vector<double> StepPipeline::g_at(double t) const {
    std::vector<double> g(state_.basis->total_frames());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = blocks_.g(i, t);
    return g;
}

namespace {
const ScalarField& amp_of(const StepPipeline::AmplitudeFrame& af, const GeometricBasis& basis,
                          std::size_t flat) {
    return basis.is_velocity_family(flat) ? af.vel.a[flat]
                                          : af.mag.a[flat - basis.lambda_u.size()];
}
}  // namespace

std::shared_ptr<const StepPipeline::PerturbationFrame> StepPipeline::perturbation(
    std::size_t n) const {
    auto it = pert_cache_.find(n);
    if (it != pert_cache_.end()) return it->second;
    const GridSpec& g = state_.grid;
    const GeometricBasis& basis = *state_.basis;
    double t = state_.times[n];
    auto af = amplitudes(n);

    auto out = std::make_shared<PerturbationFrame>();
    out->w_p = VectorField(g);
    out->w_pc = VectorField(g);
    out->w_o = VectorField(g);
    out->d_p = VectorField(g);
    out->d_pc = VectorField(g);
    out->d_o = VectorField(g);

    const std::size_t off = basis.lambda_u.size();
    for (std::size_t i = 0; i < basis.total_frames(); ++i) {
        double gi = blocks_.g(i, t);
        if (gi != 0.0) {
            const ScalarField& a = amp_of(*af, basis, i);
            const WaveVectorFrame& f = basis.frame(i);
            // principal parts
            ScalarField aphi = a * flows_.phi[i];
            for (int c = 0; c < 3; ++c) {
                for (std::size_t p = 0; p < g.points(); ++p)
                    out->w_p.comp[c].values[p] += gi * f.k1d[c] * aphi.values[p];
            }
            // curl curl route
            VectorField apot(g);
            ScalarField ap = a * flows_.potential[i];
            for (int c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < g.points(); ++p)
                    apot.comp[c].values[p] = f.k1d[c] * ap.values[p];
            out->w_pc = out->w_pc + scaled(curlcurl_spectral(apot), gi);
            if (i >= off) {
                for (int c = 0; c < 3; ++c)
                    for (std::size_t p = 0; p < g.points(); ++p) {
                        out->d_p.comp[c].values[p] += gi * f.k2d[c] * aphi.values[p];
                        apot.comp[c].values[p] = f.k2d[c] * ap.values[p];
                    }
                out->d_pc = out->d_pc + scaled(curlcurl_spectral(apot), gi);
            }
        }
    }

    // temporal correctors: accumulate M grad(a^2) weighted by h, then project
    VectorField acc_w(g), acc_d(g);
    for (std::size_t i = 0; i < basis.total_frames(); ++i) {
        double hi = blocks_.h(i, t);
        if (hi == 0.0) continue;
        const ScalarField& a = amp_of(*af, basis, i);
        ScalarField a2 = a * a;
        VectorField grad_a2 = gradient(a2);
        Mat3 m_w = basis.is_velocity_family(i) ? mean_ww_[i] : mean_ww_[i] - mean_dd_[i];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                if (m_w(r, c) != 0.0)
                    for (std::size_t p = 0; p < g.points(); ++p)
                        acc_w.comp[r].values[p] += hi * m_w(r, c) * grad_a2.comp[c].values[p];
            }
        if (!basis.is_velocity_family(i)) {
            const Mat3& m_d = mean_dw_[i];
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    if (m_d(r, c) != 0.0)
                        for (std::size_t p = 0; p < g.points(); ++p)
                            acc_d.comp[r].values[p] += hi * m_d(r, c) * grad_a2.comp[c].values[p];
                }
        }
    }
    double sig = -1.0 / double(state_.params.sigma);
    out->w_o = scaled(leray_project(remove_mean(acc_w)), sig);
    out->d_o = scaled(leray_project(remove_mean(acc_d)), sig);

    double th = theta(t);
    out->w_total = scaled(out->w_pc, th) + scaled(out->w_o, th * th);
    out->d_total = scaled(out->d_pc, th) + scaled(out->d_o, th * th);

    pert_cache_.emplace(n, out);
    trim_caches();
    return out;
}

ScalarField StepPipeline::amp_field_dt(std::size_t frame_idx, std::size_t n, bool squared) const {
    ScalarField acc(state_.grid);
    for (auto [off, wgt] : time_stencil(n, state_.times.size(), state_.dt())) {
        auto af = amplitudes(n + off);
        const ScalarField& a = amp_of(*af, *state_.basis, frame_idx);
        if (squared) {
            for (std::size_t p = 0; p < acc.values.size(); ++p)
                acc.values[p] += wgt * a.values[p] * a.values[p];
        } else {
            for (std::size_t p = 0; p < acc.values.size(); ++p)
                acc.values[p] += wgt * a.values[p];
        }
    }
    return acc;
}

VectorField StepPipeline::perturbation_dt_pc(std::size_t n, bool magnetic) const {
    // d/dt of Theta * sum g_i curlcurl(a_i potential_i): analytic Theta' and
    // g', finite differences for the amplitude factor
    const GridSpec& g = state_.grid;
    const GeometricBasis& basis = *state_.basis;
    double t = state_.times[n];
    double th = theta(t), thp = theta_dt(t);
    auto pf = perturbation(n);
    auto af = amplitudes(n);
    VectorField out = scaled(magnetic ? pf->d_pc : pf->w_pc, thp);
    const std::size_t off = basis.lambda_u.size();
    for (std::size_t i = magnetic ? off : 0; i < basis.total_frames(); ++i) {
        if (magnetic && basis.is_velocity_family(i)) continue;
        double gi = blocks_.g(i, t);
        double gpi = blocks_.g_dt(i, t);
        if (gi == 0.0 && gpi == 0.0) continue;
        const WaveVectorFrame& f = basis.frame(i);
        const Vec3 dir = magnetic ? f.k2d : f.k1d;
        const ScalarField& a = amp_of(*af, basis, i);
        // g' a term
        if (gpi != 0.0) {
            VectorField apot(g);
            ScalarField ap = a * flows_.potential[i];
            for (int c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < g.points(); ++p)
                    apot.comp[c].values[p] = dir[c] * ap.values[p];
            out = out + scaled(curlcurl_spectral(apot), th * gpi);
        }
        // g a' term
        if (gi != 0.0) {
            ScalarField da = amp_field_dt(i, n, false);
            VectorField dpot(g);
            ScalarField dp2 = da * flows_.potential[i];
            for (int c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < g.points(); ++p)
                    dpot.comp[c].values[p] = dir[c] * dp2.values[p];
            out = out + scaled(curlcurl_spectral(dpot), th * gi);
        }
    }
    return out;
}

TensorField StepPipeline::stress_piece_u(StressPart part, std::size_t n) const {
    const GridSpec& g = state_.grid;
    const GeometricBasis& basis = *state_.basis;
    double t = state_.times[n];
    double th = theta(t);
    double alpha = state_.params.alpha, nu = state_.params.nu;
    switch (part) {
        case StressPart::lin: {
            auto ml = mollified(n);
            auto pf = perturbation(n);
            VectorField ul = ml->u + z_moll(0, n);
            VectorField bl = ml->b + z_moll(1, n);
            VectorField dz = z_moll(0, n) - z_next(0, n);
            TensorField out = inv_div_sym(perturbation_dt_pc(n, false)) +
                              inv_div_sym(scaled(frac_laplacian(pf->w_total, alpha), nu)) +
                              inv_div_sym(dz) + sym_pair(ul, pf->w_total) -
                              sym_pair(bl, pf->d_total);
            retag(out, TensorSymmetry::symmetric_tracefree);
            return out;
        }
        case StressPart::corr: {
            auto pf = perturbation(n);
            VectorField wp = scaled(pf->w_p, th);
            VectorField wco = pf->w_total - wp;
            VectorField dp = scaled(pf->d_p, th);
            VectorField dco = pf->d_total - dp;
            TensorField out = ordered_outer(wp, wco, true) + ordered_outer(wco, pf->w_total, true) -
                              ordered_outer(dp, dco, true) - ordered_outer(dco, pf->d_total, true);
            retag(out, TensorSymmetry::general);  // symmetric as a sum; re-tag below
            TensorField sym = 0.5 * (out + out.transposed_copy());
            retag(sym, TensorSymmetry::symmetric_tracefree);
            return sym;
        }
        case StressPart::com1:
            return commutator_stress_u(n);
        case StressPart::com2: {
            auto pf = perturbation(n);
            auto ml = mollified(n);
            VectorField un = ml->u + pf->w_total;
            VectorField bn = ml->b + pf->d_total;
            VectorField z1l = z_moll(0, n), z2l = z_moll(1, n);
            VectorField z1n = z_next(0, n), z2n = z_next(1, n);
            VectorField dz1 = z1n - z1l, dz2 = z2n - z2l;
            TensorField out = sym_pair(un, dz1) - sym_pair(bn, dz2) +
                              outer_product_traceless(z1n, z1n) -
                              outer_product_traceless(z2n, z2n) -
                              outer_product_traceless(z1l, z1l) +
                              outer_product_traceless(z2l, z2l);
            retag(out, TensorSymmetry::symmetric_tracefree);
            return out;
        }
        case StressPart::osc1: {
            auto ml = mollified(n);
            auto pf = perturbation(n);
            double fade = 1.0 - th * th;
            double th2p = 2.0 * th * theta_dt(t);
            TensorField out = fade * ml->ru;
            if (th2p != 0.0) out = out + inv_div_sym(scaled(pf->w_o, th2p));
            retag(out, TensorSymmetry::symmetric_tracefree);
            return out;
        }
        case StressPart::osc2: {
            if (th == 0.0) return TensorField(g, TensorSymmetry::symmetric_tracefree);
            auto af = amplitudes(n);
            TensorField acc(g);
            bool live = false;
            for (std::size_t i = 0; i < basis.total_frames(); ++i) {
                double gi = blocks_.g(i, t);
                if (gi == 0.0) continue;
                live = true;
                const ScalarField& a = amp_of(*af, basis, i);
                const WaveVectorFrame& f = basis.frame(i);
                // P_{!=0}(W W) resp. P_{!=0}(W W - D D), pointwise minus mean
                Mat3 mean = basis.is_velocity_family(i) ? mean_ww_[i] : mean_ww_[i] - mean_dd_[i];
                Mat3 dirmat = basis.is_velocity_family(i)
                                  ? outer(f.k1d, f.k1d)
                                  : outer(f.k1d, f.k1d) - outer(f.k2d, f.k2d);
                const ScalarField& phi = flows_.phi[i];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        double dm = dirmat(r, c), mm = mean(r, c);
                        if (dm == 0.0 && mm == 0.0) continue;
                        auto& dst = acc.at(r, c);
                        for (std::size_t p = 0; p < g.points(); ++p) {
                            double prod = dm * phi.values[p] * phi.values[p] - mm;
                            dst.values[p] += gi * gi * a.values[p] * a.values[p] * prod;
                        }
                    }
            }
            if (!live) return TensorField(g, TensorSymmetry::symmetric_tracefree);
            TensorField out = inv_div_sym(remove_mean(tensor_divergence(acc)));
            out = th * th * out;
            retag(out, TensorSymmetry::symmetric_tracefree);
            return out;
        }
        case StressPart::osc3: {
            if (th == 0.0) return TensorField(g, TensorSymmetry::symmetric_tracefree);
            VectorField arg(g);
            for (std::size_t i = 0; i < basis.total_frames(); ++i) {
                double hi = blocks_.h(i, state_.times[n]);
                if (hi == 0.0) continue;
                ScalarField da2 = amp_field_dt(i, n, true);
                VectorField gda2 = gradient(da2);
                Mat3 m = basis.is_velocity_family(i) ? mean_ww_[i] : mean_ww_[i] - mean_dd_[i];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        if (m(r, c) != 0.0)
                            for (std::size_t p = 0; p < g.points(); ++p)
                                arg.comp[r].values[p] += hi * m(r, c) * gda2.comp[c].values[p];
            }
            TensorField out = inv_div_sym(remove_mean(arg));
            out = (-th * th / double(state_.params.sigma)) * out;
            retag(out, TensorSymmetry::symmetric_tracefree);
            return out;
        }
    }
    throw std::logic_error("stress_piece_u: unknown part");
}

TensorField StepPipeline::stress_piece_b(StressPart part, std::size_t n) const {
    const GridSpec& g = state_.grid;
    const GeometricBasis& basis = *state_.basis;
    double t = state_.times[n];
    double th = theta(t);
    double alpha = state_.params.alpha, nu = state_.params.nu;
    const std::size_t off = basis.lambda_u.size();
    switch (part) {
        case StressPart::lin: {
            auto ml = mollified(n);
            auto pf = perturbation(n);
            VectorField ul = ml->u + z_moll(0, n);
            VectorField bl = ml->b + z_moll(1, n);
            VectorField dz = z_moll(1, n) - z_next(1, n);
            TensorField out = inv_div_skew(perturbation_dt_pc(n, true)) +
                              inv_div_skew(scaled(frac_laplacian(pf->d_total, alpha), nu)) +
                              inv_div_skew(dz) + skew_pair(bl, pf->w_total) +
                              skew_pair(pf->d_total, ul);
            retag(out, TensorSymmetry::skew);
            return out;
        }
        case StressPart::corr: {
            auto pf = perturbation(n);
            VectorField wp = scaled(pf->w_p, th);
            VectorField wco = pf->w_total - wp;
            VectorField dp = scaled(pf->d_p, th);
            VectorField dco = pf->d_total - dp;
            TensorField out = ordered_outer(dp, wco, false) +
                              ordered_outer(dco, pf->w_total, false) -
                              ordered_outer(wp, dco, false) -
                              ordered_outer(wco, pf->d_total, false);
            // skew as a sum: equal to (d x w - w x d) - (dp x wp - wp x dp)
            TensorField sk = 0.5 * (out - out.transposed_copy());
            retag(sk, TensorSymmetry::skew);
            return sk;
        }
        case StressPart::com1:
            return commutator_stress_b(n);
        case StressPart::com2: {
            auto pf = perturbation(n);
            auto ml = mollified(n);
            VectorField un = ml->u + pf->w_total;
            VectorField bn = ml->b + pf->d_total;
            VectorField z1l = z_moll(0, n), z2l = z_moll(1, n);
            VectorField z1n = z_next(0, n), z2n = z_next(1, n);
            VectorField dz1 = z1n - z1l, dz2 = z2n - z2l;
            TensorField out = skew_pair(bn, dz1) + skew_pair(dz2, un) + skew_pair(z1l, z2l) +
                              skew_pair(z2n, z1n);
            retag(out, TensorSymmetry::skew);
            return out;
        }
        case StressPart::osc1: {
            auto ml = mollified(n);
            auto pf = perturbation(n);
            double fade = 1.0 - th * th;
            double th2p = 2.0 * th * theta_dt(t);
            TensorField out = fade * ml->rb;
            if (th2p != 0.0) out = out + inv_div_skew(scaled(pf->d_o, th2p));
            retag(out, TensorSymmetry::skew);
            return out;
        }
        case StressPart::osc2: {
            if (th == 0.0) return TensorField(g, TensorSymmetry::skew);
            auto af = amplitudes(n);
            TensorField acc(g);
            bool live = false;
            for (std::size_t i = off; i < basis.total_frames(); ++i) {
                double gi = blocks_.g(i, t);
                if (gi == 0.0) continue;
                live = true;
                const ScalarField& a = amp_of(*af, basis, i);
                const WaveVectorFrame& f = basis.frame(i);
                Mat3 gen = outer(f.k2d, f.k1d) - outer(f.k1d, f.k2d);
                const Mat3& mean = mean_dw_[i];
                const ScalarField& phi = flows_.phi[i];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        double dm = gen(r, c), mm = mean(r, c);
                        if (dm == 0.0 && mm == 0.0) continue;
                        auto& dst = acc.at(r, c);
                        for (std::size_t p = 0; p < g.points(); ++p) {
                            double prod = dm * phi.values[p] * phi.values[p] - mm;
                            dst.values[p] += gi * gi * a.values[p] * a.values[p] * prod;
                        }
                    }
            }
            if (!live) return TensorField(g, TensorSymmetry::skew);
            TensorField out = inv_div_skew(tensor_divergence(acc));
            out = th * th * out;
            retag(out, TensorSymmetry::skew);
            return out;
        }
        case StressPart::osc3: {
            if (th == 0.0) return TensorField(g, TensorSymmetry::skew);
            VectorField arg(g);
            for (std::size_t i = off; i < basis.total_frames(); ++i) {
                double hi = blocks_.h(i, state_.times[n]);
                if (hi == 0.0) continue;
                ScalarField da2 = amp_field_dt(i, n, true);
                VectorField gda2 = gradient(da2);
                const Mat3& m = mean_dw_[i];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        if (m(r, c) != 0.0)
                            for (std::size_t p = 0; p < g.points(); ++p)
                                arg.comp[r].values[p] += hi * m(r, c) * gda2.comp[c].values[p];
            }
            TensorField out = inv_div_skew(arg);
            out = (-th * th / double(state_.params.sigma)) * out;
            retag(out, TensorSymmetry::skew);
            return out;
        }
    }
    throw std::logic_error("stress_piece_b: unknown part");
}

TensorField StepPipeline::stress_total_u(std::size_t n) const {
    TensorField out = stress_piece_u(StressPart::lin, n);
    for (StressPart p : {StressPart::corr, StressPart::com1, StressPart::com2, StressPart::osc1,
                         StressPart::osc2, StressPart::osc3})
        out = out + stress_piece_u(p, n);
    retag(out, TensorSymmetry::symmetric_tracefree);
    return out;
}

TensorField StepPipeline::stress_total_b(std::size_t n) const {
    TensorField out = stress_piece_b(StressPart::lin, n);
    for (StressPart p : {StressPart::corr, StressPart::com1, StressPart::com2, StressPart::osc1,
                         StressPart::osc2, StressPart::osc3})
        out = out + stress_piece_b(p, n);
    retag(out, TensorSymmetry::skew);
    return out;
}

VectorField StepPipeline::velocity_next(std::size_t n) const {
    return mollified(n)->u + perturbation(n)->w_total;
}
VectorField StepPipeline::magnetic_next(std::size_t n) const {
    return mollified(n)->b + perturbation(n)->d_total;
}

TensorField StepPipeline::near_initial_stress_u(std::size_t n) const {
    double t = state_.times[n];
    if (theta(t) != 0.0)
        throw std::invalid_argument("near_initial_stress_u: Theta does not vanish here");
    auto ml = mollified(n);
    VectorField z1l = z_moll(0, n), z2l = z_moll(1, n);
    VectorField z1n = z_next(0, n), z2n = z_next(1, n);
    VectorField dz1 = z1n - z1l, dz2 = z2n - z2l;
    TensorField out = inv_div_sym(z1l - z1n) + ml->ru + commutator_stress_u(n) +
                      sym_pair(ml->u, dz1) - sym_pair(ml->b, dz2) +
                      outer_product_traceless(z1n, z1n) - outer_product_traceless(z2n, z2n) -
                      outer_product_traceless(z1l, z1l) + outer_product_traceless(z2l, z2l);
    retag(out, TensorSymmetry::symmetric_tracefree);
    return out;
}

TensorField StepPipeline::near_initial_stress_b(std::size_t n) const {
    double t = state_.times[n];
    if (theta(t) != 0.0)
        throw std::invalid_argument("near_initial_stress_b: Theta does not vanish here");
    auto ml = mollified(n);
    VectorField z1l = z_moll(0, n), z2l = z_moll(1, n);
    VectorField z1n = z_next(0, n), z2n = z_next(1, n);
    VectorField dz1 = z1n - z1l, dz2 = z2n - z2l;
    TensorField out = inv_div_skew(z2l - z2n) + ml->rb + commutator_stress_b(n) +
                      skew_pair(ml->b, dz1) + skew_pair(dz2, ml->u) + skew_pair(z1l, z2l) +
                      skew_pair(z2n, z1n);
    retag(out, TensorSymmetry::skew);
    return out;
}

// ------------------------------------------------------------------ step

namespace {

class NextSource : public FrameSource {
  public:
    explicit NextSource(std::shared_ptr<StepPipeline> pipe) : pipe_(std::move(pipe)) {}
    VectorField velocity(std::size_t n) const override { return pipe_->velocity_next(n); }
    VectorField magnetic(std::size_t n) const override { return pipe_->magnetic_next(n); }
    std::shared_ptr<const RelaxedFrame> frame(std::size_t n) const override {
        auto it = cache_.find(n);
        if (it != cache_.end()) return it->second;
        auto fr = std::make_shared<RelaxedFrame>();
        fr->u = pipe_->velocity_next(n);
        fr->b = pipe_->magnetic_next(n);
        fr->ru = pipe_->stress_total_u(n);
        fr->rb = pipe_->stress_total_b(n);
        if (cache_.size() > 10) cache_.erase(cache_.begin());
        cache_.emplace(n, fr);
        return fr;
    }
    const StepPipeline& pipeline() const { return *pipe_; }

  private:
    std::shared_ptr<StepPipeline> pipe_;
    mutable std::map<std::size_t, std::shared_ptr<const RelaxedFrame>> cache_;
};

double stress_l1(const TensorField& a, const TensorField& b) {
    return lp_norm(a, 1.0) + lp_norm(b, 1.0);
}

}  // namespace

StepResult step(const RelaxedState& state, const StepOptions& opts) {
    auto pipe = std::make_shared<StepPipeline>(state);
    StepResult result;
    result.next = state;
    result.next.q = state.q + 1;
    result.next.params.q = state.q + 1;
    result.next.params.lambda_q = state.params.lambda;
    double cutoff = std::pow(state.params.lambda, 15.0);
    result.next.noise_capped = cutoff >= state.grid.nyquist();
    result.next.noise_cutoff = std::min(cutoff, double(state.grid.nyquist()));
    result.next.fields = std::make_shared<NextSource>(pipe);

    Diagnostics& d = result.diag;
    d.delta_next = state.params.delta_next;
    d.delta_next2 = state.params.delta_next / 4.0;
    d.m_star = state.basis->m_star;
    d.noise_truncation_capped = result.next.noise_capped;
    d.s_norm = opts.s_norm;
    d.gamma_norm = opts.gamma_norm;
    d.p_norm = opts.p_norm;
    d.m_initial = lp_norm(state.noise->u0, 2.0) + lp_norm(state.noise->b0, 2.0);
    {
        double l = 0;
        for (int ch = 0; ch < 2; ++ch)
            for (std::size_t m = 0; m < state.noise->model.modes.size(); ++m)
                for (double v : state.noise->coeff[ch][m]) l = std::max(l, std::abs(v));
        d.l_noise = l;
    }
    if (result.next.noise_capped)
        d.notes.push_back("noise truncation radius capped at the grid Nyquist (exact no-op)");

    std::vector<std::size_t> diag_idx = opts.diagnostic_indices;
    if (diag_idx.empty()) {
        for (std::size_t k = 1; k <= 6; ++k) diag_idx.push_back(k * (state.times.size() - 1) / 7);
    }
    double tspan = state.times.back() - state.times.front();
    double jq = 0, jtq = 0, jn = 0, jtn = 0;
    double p2 = 0, p12 = 0, pw = 0;
    for (std::size_t n : diag_idx) {
        auto fq = state.fields->frame(n);
        double sq = stress_l1(fq->ru, fq->rb);
        jq = std::max(jq, sq);
        jtq += sq;
        auto fn = result.next.fields->frame(n);
        double sn = stress_l1(fn->ru, fn->rb);
        jn = std::max(jn, sn);
        jtn += sn;
        auto pf = pipe->perturbation(n);
        double l2 = lp_norm(pf->w_total, 2.0) + lp_norm(pf->d_total, 2.0);
        p2 += l2 * l2;
        p12 += l2;
        double ws = sobolev_norm(pf->w_total, opts.s_norm, opts.p_norm) +
                    sobolev_norm(pf->d_total, opts.s_norm, opts.p_norm);
        pw += std::pow(ws, opts.gamma_norm);
    }
    double dtw = tspan / double(diag_idx.size());
    d.j_q = jq;
    d.j_tilde_q = jtq * dtw;
    d.j_next = jn;
    d.j_tilde_next = jtn * dtw;
    d.decay_ratio = d.j_tilde_q > 0 ? d.j_tilde_next / d.j_tilde_q : 0.0;
    d.pert_l2_tx = std::sqrt(p2 * dtw);
    d.pert_l1t_l2x = p12 * dtw;
    d.pert_lgamma_wsp = std::pow(pw * dtw, 1.0 / opts.gamma_norm);

    std::vector<std::size_t> res_idx = opts.residual_indices;
    if (res_idx.empty()) res_idx = quiet_residual_indices(state, 3);
    if (res_idx.empty()) {
        std::size_t nmax = state.times.size();
        res_idx = {nmax / 3, nmax / 2, 2 * nmax / 3};
        result.diag.notes.push_back("no quiet indices available; residual at generic times");
    }
    ResidualReport rr = residual_check(result.next, res_idx);
    d.res_u = rr.res_u;
    d.res_b = rr.res_b;
    return result;
}

std::vector<std::size_t> quiet_residual_indices(const RelaxedState& state, std::size_t count) {
    TemporalBlockSet blocks =
        build_temporal_blocks(state.basis->total_frames(), state.params, state.params.T);
    double dt = state.dt();
    double margin = 3.5 * dt;
    std::vector<std::size_t> quiet;
    for (std::size_t n = 3; n + 3 < state.times.size(); ++n) {
        double t = state.times[n];
        if (t < state.params.varsigma + margin) continue;  // inside the ramp
        bool clear = true;
        for (double probe = t - margin; probe <= t + margin + 1e-12; probe += dt / 2) {
            for (std::size_t i = 0; i < blocks.count && clear; ++i)
                if (blocks.g(i, probe) != 0.0) clear = false;
            if (!clear) break;
        }
        if (clear) quiet.push_back(n);
    }
    if (quiet.size() <= count) return quiet;
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < count; ++k) out.push_back(quiet[k * (quiet.size() - 1) / std::max<std::size_t>(count - 1, 1)]);
    return out;
}

ScalarField reconstruct_pressure(const RelaxedState& state, std::size_t n) {
    const GridSpec& g = state.grid;
    auto fr = state.fields->frame(n);
    VectorField du(g);
    for (auto [off, wgt] : time_stencil(n, state.times.size(), state.dt()))
        du = du + scaled(state.fields->frame(n + off)->u, wgt);
    VectorField z1 = state.z_q(0, n);
    VectorField up = fr->u + z1, bp = fr->b + state.z_q(1, n);
    TensorField xu = outer_product(up, up) - outer_product(bp, bp);
    VectorField rhs = tensor_divergence(fr->ru) - du -
                      scaled(frac_laplacian(fr->u, state.params.alpha), state.params.nu) + z1 -
                      tensor_divergence(xu);
    // P = Delta^{-1} div rhs, zero-mean convention
    ScalarField divr = divergence(rhs);
    Spectrum s = to_spectrum(divr);
    apply_multiplier(s, [](int kx, int ky, int kz) {
        double k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        return k2 == 0.0 ? 0.0 : -1.0 / k2;
    });
    return to_physical(s, g);
}

}  // namespace tmhd
