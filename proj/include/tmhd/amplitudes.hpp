#pragma once

#include <vector>

#include "tmhd/building_blocks.hpp"
#include "tmhd/field.hpp"
#include "tmhd/geometry.hpp"

namespace tmhd {

/// Smooth cutoff: 1 on [0,1], z on [2,inf), C^inf monotone join inside the
/// envelope z/2 <= chi <= 2z on (1,2); chi >= 1 everywhere.
double chi(double z);

/// Amplitudes for one time slice. `a` is indexed by position within the
/// owning family (lambda_b for magnetic, lambda_u for velocity).
struct AmplitudeSlice {
    ScalarField rho;
    std::vector<ScalarField> a;
};

/// rho_B and a_(k), k in lambda_b, from the mollified magnetic stress.
/// Asserts pointwise that the normalized argument stays inside the skew
/// domain ball. Throws when the input is not skew.
AmplitudeSlice magnetic_amplitudes(const TensorField& rb_moll, double delta_next,
                                   const GeometricBasis& basis);

/// G^B(t,.) = sum_k a_(k)^2 (x-mean of W(x)W - D(x)D); the x-mean factors are
/// measured from the discrete flows. Symmetric and trace-free pointwise.
TensorField gb_matrix(const AmplitudeSlice& mag, const ShearFlowSet& flows);

/// rho_u and a_(k), k in lambda_u, from the mollified velocity stress plus
/// the magnetic compensation matrix.
AmplitudeSlice velocity_amplitudes(const TensorField& ru_moll, const TensorField& gb,
                                   double delta_next, const GeometricBasis& basis);

struct IdentityReport {
    double max_residual = 0;  // pointwise max |LHS - RHS|
    double lhs_scale = 0;     // max |LHS|, for relative context
    double mean_mismatch = 0; // zero-mode cross-check
};

/// Two-sided evaluation of the magnetic cancellation identity at one time;
/// g_mag holds g_(k)(t) for the magnetic frames in family order.
IdentityReport verify_identity_magnetic(const AmplitudeSlice& mag, const ShearFlowSet& flows,
                                        const std::vector<double>& g_mag,
                                        const TensorField& rb_moll);

/// Velocity counterpart: the left side sums only the lambda_u principal
/// products; the magnetic-family principal products are accounted through
/// the gb compensation, so the right side carries rho_u Id - (R + G^B).
IdentityReport verify_identity_velocity(const AmplitudeSlice& vel, const ShearFlowSet& flows,
                                        const std::vector<double>& g_vel,
                                        const TensorField& ru_moll, const TensorField& gb);

/// Closed-form constant for the L^2_{t,x} amplitude bound
/// ||a||_2 <= C (delta^{1/2} + ||R||_{L1L1}^{1/2}).
double amplitude_l2_constant(const GeometricBasis& basis, bool magnetic, double T);

}  // namespace tmhd
