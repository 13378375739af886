#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tmhd/field.hpp"
#include "tmhd/rng.hpp"

namespace tmhd {

/// One divergence-free real Fourier basis element: wave vector, polarization
/// direction (unit, orthogonal to xi), and phase (cos or sin).
struct NoiseMode {
    int xi[3];
    Vec3 pol;
    bool sine;
    double coeff[2];  // c_k per channel
    double mu(double alpha, double nu) const {
        double k2 = double(xi[0]) * xi[0] + double(xi[1]) * xi[1] + double(xi[2]) * xi[2];
        return nu * std::pow(k2, alpha) + 1.0;
    }
};

/// Trace-class noise model on the divergence-free Fourier frame.
struct NoiseModel {
    std::vector<NoiseMode> modes;
    std::uint64_t seed = 0;
    int kmax = 0;
    double amplitude[2] = {1.0, 1.0};
    double spectral_exponent = 6.0;  // c ~ |xi|^{-s0}

    double trace_class(int channel) const;
    std::string to_json() const;

    /// Modes enumerated by |xi| then lexicographically, two polarizations
    /// and two phases per canonical wave vector.
    static NoiseModel build(int kmax, double amp1, double amp2, double spectral_exponent,
                            std::uint64_t seed);
};

/// Per-mode Ornstein-Uhlenbeck coefficient paths on a uniform time grid plus
/// the deterministic semigroup parts.
struct NoiseState {
    NoiseModel model;
    double alpha = 1.0;
    double nu = 1.0;
    std::vector<double> times;
    // coeff[channel][mode][time index]; exact OU transitions, Z_i(0) = 0
    std::array<std::vector<std::vector<double>>, 2> coeff;
    VectorField u0, b0;  // initial data (divergence-free, mean-free)

    std::size_t steps() const { return times.size(); }
    /// Z_i(t_n) assembled on a grid.
    VectorField convolution_field(int channel, std::size_t n, const GridSpec& g) const;
    /// z_i(t_n) = semigroup initial part + Z_i(t_n).
    VectorField z_field(int channel, std::size_t n, const GridSpec& g) const;
    /// z_{i,q}: deterministic part plus the truncated convolution
    /// P_{<= cutoff} Z_i; the cutoff is capped at the grid Nyquist (then the
    /// truncation is a no-op on sampled noise) and `capped` reports that.
    VectorField z_truncated_field(int channel, std::size_t n, const GridSpec& g, double cutoff,
                                  bool* capped = nullptr) const;
};

/// e^{t(-nu (-Delta)^alpha - Id)} f, exact per mode.
VectorField heat_semigroup(const VectorField& f, double t, double alpha, double nu);

/// Exact-transition OU sampling of both channels along `times`.
/// Initial data must be divergence-free and mean-free.
NoiseState sample_convolution(const NoiseModel& model, const VectorField& u0,
                              const VectorField& b0, const std::vector<double>& times,
                              double alpha, double nu);

/// Sharp Fourier truncation of a sampled field at radius min(cutoff, Nyquist).
VectorField truncate_noise(const VectorField& f, double cutoff, bool* capped = nullptr);

struct RegularityReport {
    double mean_dev_se = 0;        // per-mode marginal mean, in standard errors
    double var_dev_se = 0;         // per-mode marginal variance, in standard errors
    double increment_mc_dev_se = 0;
    double increment_slope = 0;    // fitted d log E|dZ|^2 / d log gap
    std::array<double, 3> moment_ratio{};     // p = 2, 4, 8
    std::array<double, 3> moment_envelope{};  // (p-1)^{p/2} * 1.2
    bool moments_pass() const {
        for (int i = 0; i < 3; ++i)
            if (moment_ratio[i] > moment_envelope[i]) return false;
        return true;
    }
};

/// Monte-Carlo moment and increment checks against the closed OU forms.
RegularityReport verify_regularity(const NoiseModel& model, double alpha, double nu, double T,
                                   int n_steps, int n_paths);

struct SmoothingFit {
    double alpha = 0, beta = 0;
    double slope = 0, expected = 0;
    bool pass(double rel_tol = 0.10) const {
        return std::abs(slope - expected) <= rel_tol * std::abs(expected);
    }
};

/// Operator-norm smoothing rate of the fractional heat semigroup on the
/// lattice: sup over modes of |xi|^beta e^{-nu t |xi|^{2 alpha}} fitted
/// against t inside the resolved window.
SmoothingFit verify_semigroup_smoothing(double alpha, double beta, double nu, int nyquist);

}  // namespace tmhd
