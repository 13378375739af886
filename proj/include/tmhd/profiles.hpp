#pragma once

#include <vector>

namespace tmhd {

/// exp(-1/(1-u^2)) on (-1,1), zero outside.
double smooth_bump(double u);
/// exp(-1/(1-(2u-1)^2)) on (0,1), zero outside.
double smooth_bump01(double u);
/// C^inf monotone 0 -> 1 transition on [0,1], flat at both ends.
double smoothstep01(double u);

/// int_0^u smooth_bump01(v)^2 dv to machine precision.
double bump01_sq_integral(double u);
/// int_0^1 smooth_bump01(v)^2 dv.
double bump01_sq_mass();

/// Compactly supported potential profile and its negated second derivative,
/// normalized so that (1/2pi) int phi^2 = 1.
struct ProfilePair {
    double scale = 1.0;  // applied to the base bump

    double Phi(double x) const;
    double phi(double x) const;  // equals -Phi''

    // dense samples on [-1,1] for inspection and finite-difference checks
    std::vector<double> phi_samples;
    std::vector<double> Phi_samples;
    int resolution = 0;
};

/// Builds the normalized pair; resolution controls only the stored samples.
ProfilePair make_profiles(int resolution);

/// The periodized rescaled profile phi_{r}(y) on [-pi, pi), width parameter r.
double rescaled_profile(const ProfilePair& p, double r_perp, double y);

}  // namespace tmhd
