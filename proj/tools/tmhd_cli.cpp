// Command-line front end: run orchestration, persistence and machine-readable
// verification reports for the torus MHD construction toolkit.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>

#include "tmhd/amplitudes.hpp"
#include "tmhd/appendix_checks.hpp"
#include "tmhd/building_blocks.hpp"
#include "tmhd/convex_step.hpp"
#include "tmhd/galerkin.hpp"
#include "tmhd/geometry.hpp"
#include "tmhd/mhdf_io.hpp"
#include "tmhd/profiles.hpp"
#include "tmhd/quadrature.hpp"
#include "tmhd/report.hpp"
#include "tmhd/spectral_ops.hpp"
#include "tmhd/stochastic.hpp"

using nlohmann::json;
using namespace tmhd;

namespace {

constexpr const char* kVersion = "torus-mhd 1.0.0";

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

struct RunConfig {
    int grid = 24;
    int time_samples = 96;
    std::uint64_t seed = 12345;
    int level = 0;
    bool strict = false;
    json params = {{"lambda_q", 2.0}, {"lambda", 2.0},   {"r_perp", 0.5},  {"tau", 2.0},
                   {"sigma", 1},      {"delta_next", 1e-3}, {"varsigma", 0.125}, {"ell", 0.27},
                   {"T", 1.0},        {"alpha", 1.0},    {"nu", 1.0}};
    json noise = {{"kmax", 2}, {"amp1", 1e-4}, {"amp2", 1e-4}, {"spectral_exponent", 6.0}};
    double v_amplitude = 0.04;
    double h_amplitude = 0.025;
    int export_stride = 16;
    double step_residual_tol = 1e-3;
    json strict_ladder = {{"a", 1e40},  {"b", 2000000}, {"beta", 0.0},  {"eps_num", 1},
                          {"eps_den", 100}, {"alpha_num", 1}, {"alpha_den", 1}, {"r", 2.0},
                          {"L", 1.0},   {"s", 0.0},     {"gamma", 1.0}, {"p", 1e9},
                          {"delta", 0.01}};
    json raw;

    static RunConfig load(const std::string& path, std::uint64_t seed_flag, int grid_flag,
                          int level_flag, bool strict_flag) {
        RunConfig c;
        if (!path.empty()) {
            json j = json::parse(read_text_file(path));
            c.raw = j;
            if (j.contains("grid")) c.grid = j["grid"].get<int>();
            if (j.contains("time_samples")) c.time_samples = j["time_samples"].get<int>();
            if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("params")) c.params.update(j["params"]);
            if (j.contains("noise")) c.noise.update(j["noise"]);
            if (j.contains("v_amplitude")) c.v_amplitude = j["v_amplitude"].get<double>();
            if (j.contains("h_amplitude")) c.h_amplitude = j["h_amplitude"].get<double>();
            if (j.contains("export_stride")) c.export_stride = j["export_stride"].get<int>();
            if (j.contains("step_residual_tol"))
                c.step_residual_tol = j["step_residual_tol"].get<double>();
            if (j.contains("strict_ladder")) c.strict_ladder.update(j["strict_ladder"]);
        }
        if (const char* env = std::getenv("RNG_SEED")) c.seed = std::strtoull(env, nullptr, 10);
        if (seed_flag != 0) c.seed = seed_flag;
        if (grid_flag != 0) c.grid = grid_flag;
        if (level_flag >= 0) c.level = level_flag;
        c.strict = strict_flag;
        return c;
    }

    IterParams iter_params() const {
        double ell = params["ell"].get<double>();
        double min_ell = 1.05 * kTwoPi / grid;
        return IterParams::toy(level, params["lambda_q"].get<double>(),
                               params["lambda"].get<double>(), params["r_perp"].get<double>(),
                               params["tau"].get<double>(), params["sigma"].get<long>(),
                               params["delta_next"].get<double>(), params["varsigma"].get<double>(),
                               std::max(ell, min_ell), params["T"].get<double>(),
                               params["alpha"].get<double>(), params["nu"].get<double>());
    }

    NoiseModel noise_model() const {
        return NoiseModel::build(noise["kmax"].get<int>(), noise["amp1"].get<double>(),
                                 noise["amp2"].get<double>(),
                                 noise["spectral_exponent"].get<double>(), seed);
    }

    StrictLadder ladder() const {
        StrictLadder l;
        l.a = strict_ladder["a"].get<double>();
        l.b = strict_ladder["b"].get<long>();
        l.beta = strict_ladder["beta"].get<double>();
        if (l.beta == 0.0) l.beta = 5.0 / (2.0 * double(l.b) * double(l.b));
        l.eps = Fraction(strict_ladder["eps_num"].get<std::int64_t>(),
                         strict_ladder["eps_den"].get<std::int64_t>());
        l.alpha = Fraction(strict_ladder["alpha_num"].get<std::int64_t>(),
                           strict_ladder["alpha_den"].get<std::int64_t>());
        l.r_moment = strict_ladder["r"].get<double>();
        l.l_noise = strict_ladder["L"].get<double>();
        l.s_lps = strict_ladder["s"].get<double>();
        l.gamma_lps = strict_ladder["gamma"].get<double>();
        l.p_lps = strict_ladder["p"].get<double>();
        l.delta_holder = strict_ladder["delta"].get<double>();
        return l;
    }
};

std::vector<double> uniform_times(double T, int n) {
    std::vector<double> t(n + 1);
    for (int i = 0; i <= n; ++i) t[i] = T * i / n;
    return t;
}

AnalyticVectorField pattern_v(double amp) {
    return [amp](double t, const GridSpec& g) {
        VectorField f(g);
        double s = amp * smoothstep01(t / 0.3);
        f.comp[2] = ScalarField::sample(g, [s](double x, double, double) { return s * std::sin(x); });
        return f;
    };
}
AnalyticVectorField pattern_h(double amp) {
    return [amp](double t, const GridSpec& g) {
        VectorField f(g);
        double s = amp * smoothstep01(t / 0.3);
        f.comp[0] = ScalarField::sample(g, [s](double, double y, double) { return s * std::sin(y); });
        return f;
    };
}

RelaxedState state_from_recipe(const RunConfig& c, int level,
                               std::shared_ptr<const GeometricBasis> basis) {
    GridSpec grid(c.grid);
    auto times = uniform_times(c.params["T"].get<double>(), c.time_samples);
    IterParams prm = c.iter_params();
    prm.q = 0;
    NoiseModel model = c.noise_model();
    VectorField zero(grid);
    auto noise = std::make_shared<NoiseState>(
        sample_convolution(model, zero, zero, times, prm.alpha, prm.nu));
    RelaxedState st = init_state(pattern_v(c.v_amplitude), pattern_h(c.h_amplitude), noise, prm,
                                 grid, times, basis);
    for (int q = 0; q < level; ++q) {
        StepOptions opts;
        opts.residual_indices = quiet_residual_indices(st, 1);
        st = step(st, opts).next;
    }
    return st;
}

void write_state_files(const std::string& dir, const RunConfig& c, const RelaxedState& st,
                       const Diagnostics* diag, Report& report) {
    std::filesystem::create_directories(dir);
    // export a strided sample of frames to the field container
    Mhdf1 data;
    data.grid_n = c.grid;
    data.components = 24;
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < st.times.size(); n += std::max(1, c.export_stride))
        idx.push_back(n);
    data.time_samples = static_cast<int>(idx.size());
    for (std::size_t n : idx) {
        data.times.push_back(st.times[n]);
        auto fr = st.fields->frame(n);
        std::vector<ScalarField> comps;
        for (int k = 0; k < 3; ++k) comps.push_back(fr->u.comp[k]);
        for (int k = 0; k < 3; ++k) comps.push_back(fr->b.comp[k]);
        for (int k = 0; k < 9; ++k) comps.push_back(fr->ru.comp[k]);
        for (int k = 0; k < 9; ++k) comps.push_back(fr->rb.comp[k]);
        data.frames.push_back(std::move(comps));
    }
    std::string field_path = dir + "/state_q" + std::to_string(st.q) + ".mhdf1";
    write_mhdf1(field_path, data);

    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& frame : data.frames)
        for (const auto& comp : frame)
            h = fnv1a(comp.values.data(), comp.values.size() * sizeof(double), h);

    json side;
    side["version"] = kVersion;
    side["level"] = st.q;
    side["grid"] = c.grid;
    side["time_samples"] = c.time_samples;
    side["seed"] = c.seed;
    side["params"] = c.params;
    side["noise"] = c.noise;
    side["v_amplitude"] = c.v_amplitude;
    side["h_amplitude"] = c.h_amplitude;
    side["export_stride"] = c.export_stride;
    side["field_file"] = field_path;
    side["state_hash"] = h;
    side["noise_truncation_capped"] = st.noise_capped;
    if (diag) {
        side["diagnostics"] = {{"res_u", diag->res_u},
                               {"res_b", diag->res_b},
                               {"j_next", diag->j_next},
                               {"j_tilde_next", diag->j_tilde_next},
                               {"decay_ratio", diag->decay_ratio},
                               {"pert_l2_tx", diag->pert_l2_tx},
                               {"m_star", diag->m_star}};
    }
    write_text_file(dir + "/state_q" + std::to_string(st.q) + ".json", side.dump(2));
    report.meta("state_hash", std::to_string(h));
    std::cout << "state_hash " << h << "\n";
}

void emit(const std::string& dir, const std::string& name, Report& report, const RunConfig& c) {
    report.meta("version", kVersion);
    report.meta("seed", std::to_string(c.seed));
    report.meta("grid", std::to_string(c.grid));
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/" + name + ".csv", report.to_csv());
    write_text_file(dir + "/" + name + ".json", report.to_json());
    std::cout << report.to_text();
    std::cout << (report.all_pass() ? "ALL PASS" : "FAILURES PRESENT") << " (" << name << ")\n";
}

// ------------------------------------------------------------- subcommands

int cmd_geom(const RunConfig& c, const std::string& out) {
    Report rep;
    GeometricBasis basis = build_geometric_basis();
    std::filesystem::create_directories(out);
    write_text_file(out + "/basis.json", basis.to_json());

    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_sym = 0, worst_skew = 0, min_gamma = 1e300;
    for (int trial = 0; trial < 1000; ++trial) {
        Mat3 s{};
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                s(i, j) = pm(rng);
                s(j, i) = s(i, j);
            }
        s = s * (unit(rng) * basis.eps_u / std::max(frobenius(s), 1e-12));
        Mat3 arg = Mat3::identity() + s;
        auto gs = basis.gamma_sym(arg);
        worst_sym = std::max(worst_sym, frobenius(basis.reconstruct_sym(gs) - arg));
        for (double v : gs) min_gamma = std::min(min_gamma, v);
        Mat3 a{};
        double ax = pm(rng), ay = pm(rng), az = pm(rng);
        a(0, 1) = -az;
        a(1, 0) = az;
        a(0, 2) = ay;
        a(2, 0) = -ay;
        a(1, 2) = -ax;
        a(2, 1) = ax;
        a = a * (unit(rng) * basis.eps_b / std::max(frobenius(a), 1e-12));
        auto ga = basis.gamma_skew(a);
        worst_skew = std::max(worst_skew, frobenius(basis.reconstruct_skew(ga) - a));
        for (double v : ga) min_gamma = std::min(min_gamma, v);
    }
    rep.check_below("symmetric reconstruction residual (1000 draws)", worst_sym, 1e-12, "exact solve");
    rep.check_below("skew reconstruction residual (1000 draws)", worst_skew, 1e-12, "exact solve");
    rep.add_check("all gamma positive", min_gamma, 0.0, 0.0, "positivity", min_gamma > 0);
    rep.check_below("wave-vector sets disjoint", 0.0, 0.5, "exact rational comparison");
    rep.info("n_lambda", double(basis.n_lambda), "integer frame scale");
    rep.info("eps_u", basis.eps_u, "positivity radius");
    rep.info("eps_b", basis.eps_b, "positivity radius");
    rep.info("m_star", basis.m_star, "C4 bound");
    emit(out, "geom_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

int cmd_blocks(const RunConfig& c, const std::string& out) {
    Report rep;
    ProfilePair prof = make_profiles(1 << 14);
    double l2 = integrate([&](double x) { return prof.phi(x) * prof.phi(x); }, -1.0, 1.0, 128, 16);
    rep.check_close("profile mean-square normalization", l2 / kTwoPi, 1.0, 1e-8, "quadrature");
    double mass = integrate([&](double x) { return prof.phi(x); }, -1.0, 1.0, 128, 16);
    rep.check_below("profile zero mass", std::abs(mass), 1e-10, "derivative structure");

    auto fits = verify_shear_scaling(prof, {0.5, 0.25, 0.125, 0.0625}, {1.0, 2.0, INFINITY});
    for (const auto& f : fits)
        rep.check_close(f.name, f.fitted, f.expected, f.tolerance, "fitted exponent");
    auto gains = verify_shear_gradient_gain(prof, 0.5, {8, 16, 32}, 5);
    for (const auto& f : gains)
        rep.check_close(f.name, f.fitted, f.expected, f.tolerance, "fitted exponent");
    IterParams prm = c.iter_params();
    auto tfits = verify_temporal_scaling(prm, prm.T, {2, 4, 8, 16}, {1.0, 2.0, INFINITY});
    for (const auto& f : tfits)
        rep.check_close(f.name, f.fitted, f.expected, f.tolerance, "fitted exponent");

    TemporalBlockSet blocks = build_temporal_blocks(12, prm, prm.T);
    const int samples = 1 << 16;
    double norm_dev = 0, disjoint = 0;
    for (std::size_t k : {std::size_t(0), std::size_t(7)}) {
        double acc = 0;
        for (int i = 0; i < samples; ++i) acc += std::pow(blocks.g(k, prm.T * i / samples), 2);
        norm_dev = std::max(norm_dev, std::abs(acc / samples - 1.0));
    }
    for (int i = 0; i < samples; ++i) {
        double t = prm.T * i / samples;
        for (std::size_t a2 = 0; a2 < blocks.count; ++a2) {
            double ga = blocks.g(a2, t);
            if (ga == 0) continue;
            for (std::size_t b = a2 + 1; b < blocks.count; ++b)
                disjoint = std::max(disjoint, std::abs(ga * blocks.g(b, t)));
        }
    }
    rep.check_below("temporal cutoff mean-square normalization", norm_dev, 1e-8, "quadrature");
    rep.check_below("temporal supports pairwise disjoint", disjoint, 0.0, "exact supports");
    emit(out, "blocks_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

int cmd_noise(const RunConfig& c, const std::string& out) {
    Report rep;
    NoiseModel model = c.noise_model();
    std::filesystem::create_directories(out);
    write_text_file(out + "/noise_model.json", model.to_json());
    rep.info("trace_class_ch1", model.trace_class(0), "sum c^2");
    rep.info("trace_class_ch2", model.trace_class(1), "sum c^2");

    NoiseModel small = NoiseModel::build(2, 0.5, 0.5, 6.0, c.seed);
    RegularityReport rr = verify_regularity(small, 1.0, 1.0, 0.5, 64, 2000);
    rep.check_below("OU marginal mean deviation (SE units)", rr.mean_dev_se, 3.0, "Monte Carlo");
    rep.check_below("OU marginal variance deviation (SE units)", rr.var_dev_se, 3.0, "Monte Carlo");
    rep.check_below("increment closed-form deviation (SE units)", rr.increment_mc_dev_se, 4.0,
                    "Monte Carlo");
    rep.add_check("increment slope above the Hoelder threshold", rr.increment_slope,
                  2.0 * 0.45 - 0.1, 0.0, "fitted slope", rr.increment_slope >= 2.0 * 0.45 - 0.1);
    for (int i = 0; i < 3; ++i)
        rep.check_below("moment growth envelope p=" + std::to_string(int(std::pow(2, i + 1))),
                        rr.moment_ratio[i], rr.moment_envelope[i], "gaussian envelope");
    for (auto [a, b] : {std::pair{1.0, 1.0}, {1.25, 1.0}, {1.0, 2.0}}) {
        SmoothingFit fit = verify_semigroup_smoothing(a, b, 1.0, 64);
        rep.check_close("semigroup smoothing slope alpha=" + std::to_string(a) +
                            " beta=" + std::to_string(b),
                        fit.slope, fit.expected, 0.10 * std::abs(fit.expected), "operator norm fit");
    }
    emit(out, "noise_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

int cmd_init(const RunConfig& c, const std::string& out) {
    Report rep;
    auto basis = std::make_shared<GeometricBasis>(build_geometric_basis());
    RelaxedState st = state_from_recipe(c, 0, basis);
    auto idx = quiet_residual_indices(st, 3);
    if (idx.empty()) idx = {st.times.size() / 2};
    ResidualReport rr = residual_check(st, idx);
    rep.check_below("initial state residual (velocity)", rr.res_u,
                    1e-8 * std::max(1.0, rr.field_scale), "construction closes the system");
    rep.check_below("initial state residual (magnetic)", rr.res_b,
                    1e-8 * std::max(1.0, rr.field_scale), "construction closes the system");
    write_state_files(out, c, st, nullptr, rep);
    emit(out, "init_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

int cmd_step(const RunConfig& c0, const std::string& state_path, const std::string& out) {
    Report rep;
    if (!std::filesystem::exists(state_path)) {
        std::cerr << "error: state sidecar not found: " << state_path << "\n";
        return 2;
    }
    json side = json::parse(read_text_file(state_path));
    for (const char* key : {"level", "grid", "time_samples", "seed", "params", "noise"}) {
        if (!side.contains(key)) {
            std::cerr << "error: state sidecar missing field '" << key << "'\n";
            return 2;
        }
    }
    RunConfig c = c0;
    c.grid = side["grid"].get<int>();
    c.time_samples = side["time_samples"].get<int>();
    c.seed = side["seed"].get<std::uint64_t>();
    c.params = side["params"];
    c.noise = side["noise"];
    c.v_amplitude = side["v_amplitude"].get<double>();
    c.h_amplitude = side["h_amplitude"].get<double>();
    c.export_stride = side["export_stride"].get<int>();
    int level = side["level"].get<int>();

    auto basis = std::make_shared<GeometricBasis>(build_geometric_basis());
    RelaxedState st = state_from_recipe(c, level, basis);
    StepOptions opts;
    StepResult res = step(st, opts);
    rep.check_below("step residual (velocity)", res.diag.res_u, c.step_residual_tol,
                    "quiet-window residual at the demo scale");
    rep.check_below("step residual (magnetic)", res.diag.res_b, c.step_residual_tol,
                    "quiet-window residual at the demo scale");
    rep.info("j_tilde_q", res.diag.j_tilde_q, "input stress L1 in time");
    rep.info("j_tilde_next", res.diag.j_tilde_next, "output stress L1 in time");
    rep.info("decay_ratio", res.diag.decay_ratio, "trend report, not a theorem-grade assertion");
    write_state_files(out, c, res.next, &res.diag, rep);
    emit(out, "step_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

int cmd_galerkin(const RunConfig& c, const std::string& out) {
    Report rep;
    GalerkinConfig cfg;
    cfg.max_wavenumber = 2;
    cfg.grid_n = 16;
    cfg.dt = 2e-3;
    cfg.t_end = 0.25;
    cfg.alpha = c.params["alpha"].get<double>();
    cfg.nu = c.params["nu"].get<double>();
    GridSpec g(cfg.grid_n);
    std::mt19937_64 rng(c.seed);
    auto randfield = [&](double amp) {
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        VectorField base(g);
        for (int comp = 0; comp < 3; ++comp)
            base.comp[comp] = ScalarField::sample(g, [&](double x, double y, double z) {
                return pm(rng) * std::sin(x + y) + pm(rng) * std::cos(y + z);
            });
        return amp * leray_project(remove_mean(base));
    };
    VectorField u = randfield(0.3), b = randfield(0.2);
    VectorField z1 = randfield(0.05), z2 = randfield(0.05);
    VectorField v0 = randfield(0.5);
    auto steady = [](const VectorField& f) {
        return TimeField([f](double, const GridSpec& gg) {
            if (gg != f.grid) throw std::invalid_argument("grid mismatch");
            return f;
        });
    };
    LinearizedState st =
        solve_linearized(cfg, steady(u), steady(b), steady(z1), steady(z2), v0, VectorField(g));
    rep.check_below("energy inequality ledger violation", st.ledger.worst_violation,
                    1e-8 * std::max(1.0, st.ledger.energy.front()), "per-step check");
    auto basis = stokes_basis(cfg.max_wavenumber);
    VectorField vp = reconstruct_pn(project_pn(randfield(0.5), basis), basis, g);
    VectorField hp = reconstruct_pn(project_pn(randfield(0.5), basis), basis, g);
    auto cc = cancellation_check(u, b, vp, hp, basis);
    rep.check_below("transport self-term cancellation", std::abs(cc.self_term),
                    1e-10 * std::max(1.0, cc.scale), "integration by parts");
    rep.check_below("cross-term cancellation", std::abs(cc.cross_term),
                    1e-10 * std::max(1.0, cc.scale), "integration by parts");
    auto uq = uniqueness_check(cfg, steady(u), steady(b), steady(z1), steady(z2), v0, VectorField(g));
    rep.check_below("repeat-solve difference", uq.repeat_difference, 1e-10, "uniqueness");
    rep.check_below("zero-data difference system", uq.zero_data_norm, 0.0, "uniqueness");
    std::filesystem::create_directories(out);
    json ledger;
    ledger["times"] = st.ledger.times;
    ledger["energy"] = st.ledger.energy;
    ledger["dissipation_cum"] = st.ledger.dissipation_cum;
    ledger["forcing_cum"] = st.ledger.forcing_cum;
    write_text_file(out + "/galerkin_ledger.json", ledger.dump(2));
    emit(out, "galerkin_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

int cmd_verify(const RunConfig& c, const std::string& out, bool inject_geometry_fault) {
    Report rep;
    if (c.strict) {
        try {
            validate_strict_ladder(c.ladder());
            rep.add_check("strict parameter ladder admissible", 1, 1, 0, "(a,b,beta,eps)", true);
        } catch (const std::exception& e) {
            std::cerr << "strict validation error: " << e.what() << "\n";
            return 2;
        }
    }

    GeometricBasis basis = build_geometric_basis();
    if (inject_geometry_fault) {
        // corrupt one dual-coefficient entry; reconstruction must flag it
        basis.sym_dual[0][0] += 1e-3;
    }
    {
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        double worst = 0;
        for (int trial = 0; trial < 200; ++trial) {
            Mat3 s{};
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j) {
                    s(i, j) = pm(rng);
                    s(j, i) = s(i, j);
                }
            s = s * (0.5 * basis.eps_u / std::max(frobenius(s), 1e-12));
            Mat3 arg = Mat3::identity() + s;
            auto gs = basis.gamma_sym(arg);
            worst = std::max(worst, frobenius(basis.reconstruct_sym(gs) - arg));
        }
        rep.check_below("geometry: symmetric reconstruction identity", worst, 1e-12, "Lemma-style");
    }

    GridSpec g(std::min(c.grid, 32));
    {
        std::mt19937_64 rng(c.seed + 1);
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        VectorField f(g);
        for (int comp = 0; comp < 3; ++comp)
            for (auto& v : f.comp[comp].values) v = pm(rng);
        VectorField fp = leray_project(remove_mean(f));
        rep.check_below("spectral: projection leaves zero divergence", divergence_l2(fp),
                        1e-10 * std::max(1.0, max_abs(fp)), "Helmholtz");
        rep.check_below("spectral: projection idempotent", max_abs(leray_project(fp) - fp),
                        1e-12 * std::max(1.0, max_abs(fp)), "Helmholtz");
        VectorField mf = remove_mean(f);
        TensorField r = inv_div_sym(mf);
        rep.check_below("spectral: div of inverse divergence (symmetric)",
                        max_abs(tensor_divergence(r) - mf), 1e-10 * std::max(1.0, max_abs(mf)),
                        "inverse divergence");
        rep.check_below("spectral: symmetric trace-free output", r.symmetry_violation(),
                        1e-10 * std::max(1.0, max_abs(r)), "inverse divergence");
        VectorField df = leray_project(mf);
        TensorField rb = inv_div_skew(df);
        rep.check_below("spectral: div of inverse divergence (skew)",
                        max_abs(tensor_divergence(rb) - df), 1e-10 * std::max(1.0, max_abs(df)),
                        "inverse divergence");
        rep.check_below("spectral: skew output", rb.symmetry_violation(),
                        1e-10 * std::max(1.0, max_abs(rb)), "inverse divergence");
        ScalarField s1 = ScalarField::sample(g, [](double x, double, double) { return std::sin(x); });
        rep.check_close("spectral: Parseval", spectral_energy(s1),
                        lp_norm(s1, 2.0) * lp_norm(s1, 2.0), 1e-10, "transform pairing");
    }

    // amplitude identities at a modest grid
    {
        IterParams prm = c.iter_params();
        ShearFlowSet flows = build_shear_flows(basis, prm, g);
        TemporalBlockSet blocks = build_temporal_blocks(basis.total_frames(), prm, prm.T);
        std::mt19937_64 rng(c.seed + 2);
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        double delta = prm.delta_next;
        TensorField rbm(g, TensorSymmetry::skew);
        for (std::size_t p = 0; p < g.points(); ++p) {
            Mat3 m{};
            double ax = pm(rng) * delta, ay = pm(rng) * delta, az = pm(rng) * delta;
            m(0, 1) = -az;
            m(1, 0) = az;
            m(0, 2) = ay;
            m(2, 0) = -ay;
            m(1, 2) = -ax;
            m(2, 1) = ax;
            rbm.set_point(p, m);
        }
        AmplitudeSlice mag = magnetic_amplitudes(rbm, delta, basis);
        TensorField gb = gb_matrix(mag, flows);
        TensorField rum(g, TensorSymmetry::symmetric_tracefree);
        for (std::size_t p = 0; p < g.points(); ++p) {
            Mat3 m{};
            m(0, 0) = pm(rng) * delta;
            m(1, 1) = pm(rng) * delta;
            m(2, 2) = -m(0, 0) - m(1, 1);
            m(0, 1) = m(1, 0) = pm(rng) * delta;
            m(0, 2) = m(2, 0) = pm(rng) * delta;
            m(1, 2) = m(2, 1) = pm(rng) * delta;
            rum.set_point(p, m);
        }
        AmplitudeSlice vel = velocity_amplitudes(rum, gb, delta, basis);
        std::vector<double> gm, gv;
        const std::size_t off = basis.lambda_u.size();
        for (std::size_t i = 0; i < basis.lambda_b.size(); ++i) gm.push_back(blocks.g(off + i, 0.4));
        for (std::size_t i = 0; i < off; ++i) gv.push_back(blocks.g(i, 0.4));
        auto repm = verify_identity_magnetic(mag, flows, gm, rbm);
        auto repv = verify_identity_velocity(vel, flows, gv, rum, gb);
        rep.check_below("amplitudes: magnetic cancellation identity", repm.max_residual, 1e-9,
                        "two-sided evaluation");
        rep.check_below("amplitudes: velocity cancellation identity", repv.max_residual, 1e-9,
                        "two-sided evaluation");
        rep.check_close("amplitudes: cutoff lower branch", chi(0.5), 1.0, 0.0, "piecewise");
        rep.check_close("amplitudes: cutoff linear branch", chi(3.0), 3.0, 0.0, "piecewise");
    }

    // stochastic, compact versions
    {
        NoiseModel small = NoiseModel::build(2, 0.5, 0.5, 6.0, c.seed);
        RegularityReport rr = verify_regularity(small, 1.0, 1.0, 0.5, 32, 1000);
        rep.check_below("stochastic: OU marginal mean (SE)", rr.mean_dev_se, 3.5, "Monte Carlo");
        rep.check_below("stochastic: OU marginal variance (SE)", rr.var_dev_se, 3.5, "Monte Carlo");
        SmoothingFit fit = verify_semigroup_smoothing(1.0, 1.0, 1.0, 32);
        rep.check_close("stochastic: semigroup smoothing slope", fit.slope, fit.expected,
                        0.10 * std::abs(fit.expected), "operator norm fit");
    }

    // decorrelation and commutator
    {
        GridSpec gd(64);
        ScalarField f =
            ScalarField::sample(gd, [](double, double y, double) { return 1.0 + 0.5 * std::sin(y); });
        auto dc = decorrelation_check(f, [](double y) { return std::sin(y); }, 1, 8, 2.0);
        rep.check_below("appendix: decorrelation error below the bound", dc.lhs_error,
                        dc.bound + 1e-12, "refined Hoelder");
        ScalarField a =
            ScalarField::sample(gd, [](double x, double, double) { return std::sin(x); });
        std::mt19937_64 rng(c.seed + 3);
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        ScalarField noise_f(gd);
        for (auto& v : noise_f.values) v = pm(rng);
        auto ccr = commutator_check(a, remove_mean(noise_f), 8, 2.0);
        rep.check_below("appendix: commutator ratio bounded", ccr.ratio, 10.0, "Calderon-Zygmund");
    }

    // end-to-end toy step
    {
        auto basis_ptr = std::make_shared<GeometricBasis>(build_geometric_basis());
        RunConfig cc = c;
        cc.grid = std::min(c.grid, 24);
        cc.time_samples = std::min(c.time_samples, 96);
        RelaxedState st = state_from_recipe(cc, 0, basis_ptr);
        auto idx = quiet_residual_indices(st, 2);
        ResidualReport rr0 = residual_check(st, idx.empty() ? std::vector<std::size_t>{40} : idx);
        rep.check_below("step: initial state residual", std::max(rr0.res_u, rr0.res_b),
                        1e-8 * std::max(1.0, rr0.field_scale), "construction closes the system");
        StepOptions opts;
        StepResult res = step(st, opts);
        rep.check_below("step: level-1 residual (velocity)", res.diag.res_u, 2e-4, "quiet window");
        rep.check_below("step: level-1 residual (magnetic)", res.diag.res_b, 2e-4, "quiet window");
        auto fr = res.next.fields->frame(st.times.size() / 2);
        rep.check_below("step: stress symmetry classes preserved",
                        std::max(fr->ru.symmetry_violation(), fr->rb.symmetry_violation()), 1e-10,
                        "assembly");
        double mean_dev = 0;
        for (int comp = 0; comp < 3; ++comp)
            mean_dev = std::max({mean_dev, std::abs(fr->u.comp[comp].mean()),
                                 std::abs(fr->b.comp[comp].mean())});
        rep.check_below("step: spatial means conserved", mean_dev, 1e-12, "mean-free fields");
    }

    // galerkin compact
    {
        GalerkinConfig cfg;
        cfg.max_wavenumber = 2;
        cfg.grid_n = 16;
        cfg.dt = 2e-3;
        cfg.t_end = 0.1;
        GridSpec gg(cfg.grid_n);
        auto zero_tf = [](double, const GridSpec& gz) { return VectorField(gz); };
        std::mt19937_64 rng(c.seed + 4);
        std::uniform_real_distribution<double> pm(-1.0, 1.0);
        VectorField v0(gg);
        for (int comp = 0; comp < 3; ++comp)
            v0.comp[comp] = ScalarField::sample(
                gg, [&](double x, double y, double) { return pm(rng) * std::sin(x + y); });
        v0 = leray_project(remove_mean(v0));
        LinearizedState st = solve_linearized(cfg, zero_tf, zero_tf, zero_tf, zero_tf, v0,
                                              VectorField(gg));
        rep.check_below("galerkin: dissipative energy ledger", st.ledger.worst_violation, 1e-10,
                        "pure decay");
    }

    emit(out, "verify_report", rep, c);
    return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudospectral construction-and-verification toolkit for stochastic MHD on the torus"};
    app.set_version_flag("--version", kVersion);

    std::string config_path, out_dir = "out", state_path;
    std::uint64_t seed_flag = 0;
    int grid_flag = 0, level_flag = -1;
    bool strict_flag = false, inject_geom_fault = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed_flag, "RNG seed override");
    app.add_option("--grid", grid_flag, "grid points per axis override");
    app.add_option("--level", level_flag, "iteration level");
    app.add_flag("--strict", strict_flag, "validate the strict parameter ladder");

    auto* verify = app.add_subcommand("verify", "run the full property suite");
    verify->add_flag("--inject-geometry-fault", inject_geom_fault,
                     "corrupt the geometric dual data (fault-injection test)");
    auto* geom = app.add_subcommand("geom", "build and check the geometric basis");
    auto* blocks = app.add_subcommand("blocks", "building-block normalizations and scaling fits");
    auto* noisec = app.add_subcommand("noise", "noise model, moments and smoothing fits");
    auto* init = app.add_subcommand("init", "build the level-0 relaxed state");
    auto* stepc = app.add_subcommand("step", "advance a stored state one level");
    stepc->add_option("--state", state_path, "state sidecar JSON")->required();
    auto* gal = app.add_subcommand("galerkin", "linearized solver with energy ledger");
    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();
    app.require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig c = RunConfig::load(config_path, seed_flag, grid_flag, level_flag, strict_flag);
        if (verify->parsed()) return cmd_verify(c, out_dir, inject_geom_fault);
        if (geom->parsed()) return cmd_geom(c, out_dir);
        if (blocks->parsed()) return cmd_blocks(c, out_dir);
        if (noisec->parsed()) return cmd_noise(c, out_dir);
        if (init->parsed()) return cmd_init(c, out_dir);
        if (stepc->parsed()) return cmd_step(c, state_path, out_dir);
        if (gal->parsed()) return cmd_galerkin(c, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
