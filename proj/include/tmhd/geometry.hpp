#pragma once

#include <string>
#include <vector>

#include "tmhd/fraction.hpp"
#include "tmhd/vec3.hpp"

namespace tmhd {

/// Orthonormal rational frame attached to one oscillation direction.
struct WaveVectorFrame {
    FracVec3 k, k1, k2;   // exact; orthonormality is verified in rationals
    Vec3 kd, k1d, k2d;    // cached doubles
};

/// Wave-vector sets and positive amplitude functionals for the two
/// geometric decompositions: symmetric matrices near Id over lambda_u,
/// skew matrices near 0 over lambda_b (role-swapped +/- pairs).
struct GeometricBasis {
    std::vector<WaveVectorFrame> lambda_u;
    std::vector<WaveVectorFrame> lambda_b;
    long n_lambda = 0;  // common integer scale: N * k integer for all frames
    double eps_u = 0;
    double eps_b = 0;
    double m_star = 0;

    // Dual data. sym_dual[i] represents the linear functional giving
    // gamma^2_i(S) as a Frobenius pairing; skew_inv inverts the axis matrix.
    std::array<std::array<double, 6>, 6> sym_dual{};   // coords 11,22,33,12,13,23
    std::array<std::array<double, 3>, 3> skew_inv{};
    // per magnetic frame: (direction pair index, +1/-1 for the sign role)
    std::array<std::pair<int, int>, 6> skew_pair{};

    /// gamma_(k)(S) for S symmetric with |S - Id|_F <= eps_u; all positive.
    std::vector<double> gamma_sym(const Mat3& s) const;
    /// gamma_(k)(A) for A skew with |A|_F <= eps_b; all positive.
    std::vector<double> gamma_skew(const Mat3& a) const;

    Mat3 reconstruct_sym(const std::vector<double>& gamma) const;
    Mat3 reconstruct_skew(const std::vector<double>& gamma) const;

    std::size_t total_frames() const { return lambda_u.size() + lambda_b.size(); }
    /// Frame by flat index, lambda_u first then lambda_b.
    const WaveVectorFrame& frame(std::size_t i) const {
        return i < lambda_u.size() ? lambda_u[i] : lambda_b[i - lambda_u.size()];
    }
    bool is_velocity_family(std::size_t i) const { return i < lambda_u.size(); }

    std::string to_json() const;
};

/// Deterministic construction; every claimed property is verified, in exact
/// rational arithmetic where possible, and a violation throws with a
/// diagnostic naming the failed condition.
GeometricBasis build_geometric_basis();

/// Certified upper bound for the summed C^4 norms of all gamma functionals
/// over their domain balls scaled by `scale` (scale=1 is the stored radius).
double estimate_m_star(const GeometricBasis& basis, double scale = 1.0);

}  // namespace tmhd
