#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tmhd/field.hpp"
#include "tmhd/fraction.hpp"
#include "tmhd/geometry.hpp"
#include "tmhd/profiles.hpp"

namespace tmhd {

/// Scheme parameters for one iteration level. Toy mode carries directly-set
/// working scales; the strict parameter ladder is validated separately (its
/// admissible values are far beyond any representable grid).
struct IterParams {
    bool strict = false;
    int q = 0;
    double T = 1.0;
    double alpha = 1.0;
    double nu = 1.0;

    double lambda_q = 2.0;    // level-q frequency (noise truncation radius base)
    double lambda = 8.0;      // lambda_{q+1}, oscillation frequency
    double r_perp = 0.5;      // spatial concentration
    double tau = 4.0;         // temporal concentration
    long sigma = 1;           // temporal oscillation
    double delta_next = 1e-2; // delta_{q+1}, stress size target
    double varsigma = 0.125;  // varsigma_q, initial-time cutoff scale
    double ell = 0.02;        // mollification width

    static IterParams toy(int q, double lambda_q, double lambda, double r_perp, double tau,
                          long sigma, double delta_next, double varsigma, double ell,
                          double T = 1.0, double alpha = 1.0, double nu = 1.0);
};

/// The admissible-regime constraints on (a, b, beta, eps). Validation only:
/// the implied lambda_q = a^(b^q) values overflow any numeric type, so the
/// derived scales are reported in logarithms.
struct StrictLadder {
    double a = 0;
    long b = 0;
    double beta = 0;
    Fraction eps{1, 100};
    Fraction alpha{1, 1};
    double nu = 1.0;
    double r_moment = 2.0;   // moment index r > 1
    double l_noise = 1.0;    // noise constant L >= 1
    double s_lps = 0.0;      // target (s, gamma, p)
    double gamma_lps = 1.0;
    double p_lps = 2.0;
    double delta_holder = 1.0 / 100.0;
};

/// Throws std::invalid_argument naming the violated constraint.
void validate_strict_ladder(const StrictLadder& l);
/// log(lambda_q) = b^q log(a).
double strict_log_lambda(const StrictLadder& l, int q);

/// Sampled intermittent shear flows for every frame of the basis.
/// W_(k) = phi[k] * k1 for all frames; D_(k) = phi[k] * k2 on the magnetic
/// family. potential[k] = (-Delta)^{-1} phi[k] so that
/// curl curl (potential k1) = phi k1 holds exactly in the discrete algebra.
struct ShearFlowSet {
    GridSpec grid;
    const GeometricBasis* basis = nullptr;
    IterParams params;
    ProfilePair profile;
    long j_freq = 0;  // lambda * r_perp, integral
    std::vector<ScalarField> phi;
    std::vector<ScalarField> potential;
    // discrete renormalization factors applied, and the fraction of the
    // continuum profile's mean-square mass the grid harmonics capture
    std::vector<double> renorm_scale;
    std::vector<double> renorm_shift;
    std::vector<double> captured_mass;

    VectorField velocity_flow(std::size_t i) const;           // W_(k)
    VectorField magnetic_flow(std::size_t i) const;           // D_(k), magnetic frames only
    VectorField velocity_potential_flow(std::size_t i) const; // W^c_(k) = potential k1
    VectorField magnetic_potential_flow(std::size_t i) const; // D^c_(k) = potential k2
};

ShearFlowSet build_shear_flows(const GeometricBasis& basis, const IterParams& params,
                               const GridSpec& grid);

/// Temporal cutoffs with pairwise disjoint supports: g_(k), their rescaled
/// accumulators h_(k), and analytic time derivatives.
struct TemporalBlockSet {
    double T = 1;
    double tau = 1;
    long sigma = 1;
    std::size_t count = 0;
    double width = 0;       // base bump width
    double amplitude = 0;   // base bump normalizer
    std::vector<double> shift;

    double g_base(std::size_t i, double t) const;  // g_k
    double g(std::size_t i, double t) const;       // g_(k)
    double g_dt(std::size_t i, double t) const;    // analytic d/dt g_(k)
    double h(std::size_t i, double t) const;       // h_(k)
    /// Support of g_(k) restricted to one sigma-period, as [lo, hi) within
    /// [0, T/sigma); used by the disjointness checks.
    std::pair<double, double> base_support(std::size_t i) const;
};

TemporalBlockSet build_temporal_blocks(std::size_t count, const IterParams& params, double T);

struct ScalingFit {
    std::string name;
    double fitted = 0;
    double expected = 0;
    double tolerance = 0;
    bool pass() const { return std::abs(fitted - expected) <= tolerance; }
};

/// Lemma-style L^p scaling of the shear profiles against r_perp, and the
/// derivative gain against lambda (fitted exponents; constants unchecked).
std::vector<ScalingFit> verify_shear_scaling(const ProfilePair& p,
                                             const std::vector<double>& r_perp_sweep,
                                             const std::vector<double>& p_list);
std::vector<ScalingFit> verify_shear_gradient_gain(const ProfilePair& p, double r_perp,
                                                   const std::vector<double>& lambda_sweep,
                                                   long n_lambda);

/// L^gamma scaling of g_(k) against tau.
std::vector<ScalingFit> verify_temporal_scaling(const IterParams& base, double T,
                                                const std::vector<double>& tau_sweep,
                                                const std::vector<double>& gamma_list);

}  // namespace tmhd
