#include "tmhd/profiles.hpp"

#include <cmath>
#include <stdexcept>

#include "tmhd/quadrature.hpp"

namespace tmhd {

double smooth_bump(double u) {
    double s = 1.0 - u * u;
    return s > 0 ? std::exp(-1.0 / s) : 0.0;
}

double smooth_bump01(double u) { return smooth_bump(2.0 * u - 1.0); }

double smoothstep01(double u) {
    if (u <= 0) return 0.0;
    if (u >= 1) return 1.0;
    double fa = std::exp(-1.0 / u);
    double fb = std::exp(-1.0 / (1.0 - u));
    return fa / (fa + fb);
}

double bump01_sq_mass() {
    static const double m =
        integrate([](double v) { return smooth_bump01(v) * smooth_bump01(v); }, 0.0, 1.0, 64, 16);
    return m;
}

double bump01_sq_integral(double u) {
    if (u <= 0) return 0.0;
    if (u >= 1) return bump01_sq_mass();
    return integrate([](double v) { return smooth_bump01(v) * smooth_bump01(v); }, 0.0, u, 64, 16);
}

namespace {

// -d^2/dx^2 of the unit bump, by the chain rule on exp(-1/(1-x^2)).
double bump_neg_second_derivative(double x) {
    double s = 1.0 - x * x;
    if (s <= 1e-9) return 0.0;
    double b = std::exp(-1.0 / s);
    if (b == 0.0) return 0.0;
    double s2 = s * s;
    double g = -2.0 * x / s2;                          // (d/dx)(-1/s)
    double gp = -2.0 / s2 - 8.0 * x * x / (s2 * s);    // derivative of g
    return -b * (g * g + gp);
}

double phi_normalizer() {
    static const double c = [] {
        double i2 = integrate(
            [](double x) {
                double v = bump_neg_second_derivative(x);
                return v * v;
            },
            -1.0, 1.0, 128, 16);
        // (1/2pi) int (c phi0)^2 = 1
        return std::sqrt(2.0 * M_PI / i2);
    }();
    return c;
}

}  // namespace

double ProfilePair::Phi(double x) const { return scale * smooth_bump(x); }

double ProfilePair::phi(double x) const { return scale * bump_neg_second_derivative(x); }

ProfilePair make_profiles(int resolution) {
    if (resolution < 16) throw std::invalid_argument("make_profiles: resolution too small");
    ProfilePair p;
    p.scale = phi_normalizer();
    p.resolution = resolution;
    p.phi_samples.resize(resolution + 1);
    p.Phi_samples.resize(resolution + 1);
    for (int i = 0; i <= resolution; ++i) {
        double x = -1.0 + 2.0 * i / resolution;
        p.phi_samples[i] = p.phi(x);
        p.Phi_samples[i] = p.Phi(x);
    }
    return p;
}

double rescaled_profile(const ProfilePair& p, double r_perp, double y) {
    if (r_perp <= 0 || r_perp > 1)
        throw std::invalid_argument("rescaled_profile: r_perp must lie in (0, 1]");
    // wrap to [-pi, pi); the support has width 2 r_perp <= 2 < 2 pi so the
    // periodization is a single translate
    double w = std::remainder(y, 2.0 * M_PI);
    return p.phi(w / r_perp) / std::sqrt(r_perp);
}

}  // namespace tmhd
