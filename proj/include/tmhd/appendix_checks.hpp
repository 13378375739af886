#pragma once

#include <functional>

#include "tmhd/field.hpp"

namespace tmhd {

struct DecorrelationResult {
    double lhs_error = 0;  // | ||f g(theta.)||_p - ||f||_p ||g||_p |
    double bound = 0;      // theta^{-1/p} ||f||_{C1} ||g||_p
};

/// Refined Hoelder inequality check: g is a 1D periodic profile applied along
/// the first axis as g(theta * x1). Errors out when theta * max_freq exceeds
/// the Nyquist frequency of f's grid.
DecorrelationResult decorrelation_check(const ScalarField& f,
                                        const std::function<double(double)>& g, int g_max_freq,
                                        int theta, double p);

struct CommutatorResult {
    double lhs = 0;    // || |grad|^{-1} P_{!=0} ( a P_{>=k} f ) ||_p
    double bound = 0;  // k^{-1} || grad^2 a ||_inf || f ||_p
    double ratio = 0;
};

CommutatorResult commutator_check(const ScalarField& a, const ScalarField& f, int k_cut, double p);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tmhd
