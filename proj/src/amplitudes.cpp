#include "tmhd/amplitudes.hpp"

#include <cmath>
#include <stdexcept>

#include "tmhd/profiles.hpp"

namespace tmhd {

double chi(double z) {
    if (z < 0) throw std::domain_error("chi: negative argument");
    if (z <= 1.0) return 1.0;
    if (z >= 2.0) return z;
    return 1.0 + smoothstep01(z - 1.0) * (z - 1.0);
}

namespace {

void check_skew(const TensorField& t) {
    if (t.symmetry != TensorSymmetry::skew)
        throw std::invalid_argument("magnetic_amplitudes: stress must be tagged skew");
    t.enforce_symmetry(1e-9 * std::max(1.0, max_abs(t)));
}

void check_symtf(const TensorField& t, const char* who) {
    if (t.symmetry != TensorSymmetry::symmetric_tracefree)
        throw std::invalid_argument(std::string(who) + ": stress must be symmetric trace-free");
    t.enforce_symmetry(1e-9 * std::max(1.0, max_abs(t)));
}

}  // namespace

AmplitudeSlice magnetic_amplitudes(const TensorField& rb_moll, double delta_next,
                                   const GeometricBasis& basis) {
    check_skew(rb_moll);
    const GridSpec& g = rb_moll.grid;
    AmplitudeSlice out;
    out.rho = ScalarField(g);
    out.a.assign(basis.lambda_b.size(), ScalarField(g));

    const double eps_b = basis.eps_b;
    const std::size_t npts = g.points();
    for (std::size_t p = 0; p < npts; ++p) {
        Mat3 r = rb_moll.point(p);
        double rn = frobenius(r);
        double rho = 2.0 / eps_b * delta_next * chi(rn / delta_next);
        out.rho.values[p] = rho;
        // normalized argument -R/rho must stay in the domain ball
        if (rn / rho > eps_b * (1.0 + 1e-12))
            throw std::logic_error("magnetic_amplitudes: normalized stress left the domain ball");
        Vec3 axis = {-r(2, 1) / rho, -r(0, 2) / rho, -r(1, 0) / rho};
        double t[3];
        for (int i = 0; i < 3; ++i)
            t[i] = basis.skew_inv[i][0] * axis.x + basis.skew_inv[i][1] * axis.y +
                   basis.skew_inv[i][2] * axis.z;
        for (std::size_t i = 0; i < out.a.size(); ++i) {
            auto [which, sign] = basis.skew_pair[i];
            double c = 0.5 + 0.5 * sign * t[which];
            if (c <= 0) throw std::logic_error("magnetic_amplitudes: coefficient not positive");
            out.a[i].values[p] = std::sqrt(rho * c);
        }
    }
    return out;
}

TensorField gb_matrix(const AmplitudeSlice& mag, const ShearFlowSet& flows) {
    const GeometricBasis& basis = *flows.basis;
    const GridSpec& g = mag.rho.grid;
    TensorField out(g, TensorSymmetry::symmetric_tracefree);
    const std::size_t off = basis.lambda_u.size();
    for (std::size_t i = 0; i < basis.lambda_b.size(); ++i) {
        // x-mean of W (x) W - D (x) D, measured from the discrete flow
        double phi2 = 0;
        const ScalarField& phi = flows.phi[off + i];
        for (double v : phi.values) phi2 += v * v;
        phi2 /= double(phi.values.size());
        const WaveVectorFrame& f = basis.frame(off + i);
        Mat3 m = (outer(f.k1d, f.k1d) - outer(f.k2d, f.k2d)) * phi2;
        const ScalarField& a = mag.a[i];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                if (m(r, c) == 0.0) continue;
                auto& dst = out.at(r, c);
                for (std::size_t p = 0; p < dst.values.size(); ++p)
                    dst.values[p] += m(r, c) * a.values[p] * a.values[p];
            }
    }
    return out;
}

AmplitudeSlice velocity_amplitudes(const TensorField& ru_moll, const TensorField& gb,
                                   double delta_next, const GeometricBasis& basis) {
    check_symtf(ru_moll, "velocity_amplitudes");
    const GridSpec& g = ru_moll.grid;
    AmplitudeSlice out;
    out.rho = ScalarField(g);
    out.a.assign(basis.lambda_u.size(), ScalarField(g));

    const double eps_u = basis.eps_u;
    const std::size_t npts = g.points();
    for (std::size_t p = 0; p < npts; ++p) {
        Mat3 x = ru_moll.point(p) + gb.point(p);
        double xn = frobenius(x);
        double rho = 2.0 / eps_u * delta_next * chi(xn / delta_next);
        out.rho.values[p] = rho;
        if (xn / rho > eps_u * (1.0 + 1e-12))
            throw std::logic_error("velocity_amplitudes: normalized stress left the domain ball");
        Mat3 s = Mat3::identity() - x * (1.0 / rho);
        double coords[6] = {s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(0, 2), s(1, 2)};
        for (std::size_t i = 0; i < out.a.size(); ++i) {
            double c = 0;
            for (int j = 0; j < 6; ++j) c += basis.sym_dual[i][j] * coords[j];
            if (c <= 0) throw std::logic_error("velocity_amplitudes: coefficient not positive");
            out.a[i].values[p] = std::sqrt(rho * c);
        }
    }
    return out;
}

namespace {

Mat3 measured_mean(const ShearFlowSet& flows, std::size_t frame, bool diff_of_squares) {
    const GeometricBasis& basis = *flows.basis;
    double phi2 = 0;
    for (double v : flows.phi[frame].values) phi2 += v * v;
    phi2 /= double(flows.phi[frame].values.size());
    const WaveVectorFrame& f = basis.frame(frame);
    if (diff_of_squares) return (outer(f.k1d, f.k1d) - outer(f.k2d, f.k2d)) * phi2;
    return (outer(f.k2d, f.k1d) - outer(f.k1d, f.k2d)) * phi2;
}

}  // namespace

IdentityReport verify_identity_magnetic(const AmplitudeSlice& mag, const ShearFlowSet& flows,
                                        const std::vector<double>& g_mag,
                                        const TensorField& rb_moll) {
    const GeometricBasis& basis = *flows.basis;
    const GridSpec& grid = rb_moll.grid;
    const std::size_t off = basis.lambda_u.size();
    const std::size_t nb = basis.lambda_b.size();
    if (g_mag.size() != nb) throw std::invalid_argument("verify_identity_magnetic: g size");

    // mean matrices and the frame generators
    std::vector<Mat3> mean_m(nb);
    std::vector<Mat3> gen(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        mean_m[i] = measured_mean(flows, off + i, false);
        const WaveVectorFrame& f = basis.frame(off + i);
        gen[i] = outer(f.k2d, f.k1d) - outer(f.k1d, f.k2d);
    }

    IdentityReport rep;
    Mat3 lhs_mean_acc{}, rhs_mean_acc{};
    const std::size_t npts = grid.points();
    for (std::size_t p = 0; p < npts; ++p) {
        Mat3 lhs{}, osc{}, temporal{};
        for (std::size_t i = 0; i < nb; ++i) {
            double a2 = mag.a[i].values[p];
            a2 *= a2;
            double g2 = g_mag[i] * g_mag[i];
            double phi = flows.phi[off + i].values[p];
            Mat3 prod = gen[i] * (phi * phi);  // (D (x) W - W (x) D)(x)
            lhs += (a2 * g2) * prod;
            osc += (a2 * g2) * (prod - mean_m[i]);
            temporal += (a2 * (g2 - 1.0)) * mean_m[i];
        }
        Mat3 rhs = rb_moll.point(p) * (-1.0) + osc + temporal;
        rep.max_residual = std::max(rep.max_residual, frobenius(lhs - rhs));
        rep.lhs_scale = std::max(rep.lhs_scale, frobenius(lhs));
        lhs_mean_acc += lhs;
        rhs_mean_acc += rhs;
    }
    rep.mean_mismatch = frobenius(lhs_mean_acc - rhs_mean_acc) / double(npts);
    return rep;
}

IdentityReport verify_identity_velocity(const AmplitudeSlice& vel, const ShearFlowSet& flows,
                                        const std::vector<double>& g_vel,
                                        const TensorField& ru_moll, const TensorField& gb) {
    const GeometricBasis& basis = *flows.basis;
    const GridSpec& grid = ru_moll.grid;
    const std::size_t nu = basis.lambda_u.size();
    if (g_vel.size() != nu) throw std::invalid_argument("verify_identity_velocity: g size");

    std::vector<Mat3> mean_m(nu);
    std::vector<Mat3> gen(nu);
    for (std::size_t i = 0; i < nu; ++i) {
        double phi2 = 0;
        for (double v : flows.phi[i].values) phi2 += v * v;
        phi2 /= double(flows.phi[i].values.size());
        const WaveVectorFrame& f = basis.frame(i);
        gen[i] = outer(f.k1d, f.k1d);
        mean_m[i] = gen[i] * phi2;
    }

    IdentityReport rep;
    Mat3 lhs_mean_acc{}, rhs_mean_acc{};
    const std::size_t npts = grid.points();
    for (std::size_t p = 0; p < npts; ++p) {
        Mat3 lhs{}, osc{}, temporal{};
        for (std::size_t i = 0; i < nu; ++i) {
            double a2 = vel.a[i].values[p];
            a2 *= a2;
            double g2 = g_vel[i] * g_vel[i];
            double phi = flows.phi[i].values[p];
            Mat3 prod = gen[i] * (phi * phi);
            lhs += (a2 * g2) * prod;
            osc += (a2 * g2) * (prod - mean_m[i]);
            temporal += (a2 * (g2 - 1.0)) * mean_m[i];
        }
        double rho = vel.rho.values[p];
        Mat3 rhs = Mat3::identity() * rho - (ru_moll.point(p) + gb.point(p)) + osc + temporal;
        rep.max_residual = std::max(rep.max_residual, frobenius(lhs - rhs));
        rep.lhs_scale = std::max(rep.lhs_scale, frobenius(lhs));
        lhs_mean_acc += lhs;
        rhs_mean_acc += rhs;
    }
    rep.mean_mismatch = frobenius(lhs_mean_acc - rhs_mean_acc) / double(npts);
    return rep;
}

double amplitude_l2_constant(const GeometricBasis& basis, bool magnetic, double T) {
    // a^2 = rho gamma^2 with gamma^2 <= 3/4 on the half-distance ball and
    // rho <= 2 eps^{-1} (delta + 2 |R|) from the chi envelope, so
    // int int a^2 <= 1.5 eps^{-1} (delta T (2pi)^3 + 2 ||R||_{L1L1}).
    double eps = magnetic ? basis.eps_b : basis.eps_u;
    double vol = kTwoPi * kTwoPi * kTwoPi;
    double c1 = std::sqrt(1.5 / eps * T * vol);
    double c2 = std::sqrt(3.0 / eps);
    return std::max(c1, c2);
}

}  // namespace tmhd
