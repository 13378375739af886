#pragma once

#include <functional>
#include <vector>

#include "tmhd/field.hpp"

namespace tmhd {

/// Divergence-free Fourier frame entry used as the Stokes eigenbasis on the
/// torus; eigenvalue |xi|^2.
struct StokesMode {
    int xi[3];
    Vec3 pol;
    bool sine;
    double eigenvalue;
};

/// Enumeration by |xi| then lexicographic order, two polarizations and two
/// phases per canonical wave vector with |xi| <= max_wavenumber.
std::vector<StokesMode> stokes_basis(int max_wavenumber);

/// Galerkin coefficients of a field: <f, a_i> over the retained modes.
std::vector<double> project_pn(const VectorField& f, const std::vector<StokesMode>& basis);
/// Reconstruction sum u_i a_i.
VectorField reconstruct_pn(const std::vector<double>& coeff, const std::vector<StokesMode>& basis,
                           const GridSpec& g);

using TimeField = std::function<VectorField(double t, const GridSpec&)>;

struct GalerkinConfig {
    int max_wavenumber = 2;
    int grid_n = 16;        // >= 4 * max_wavenumber keeps the projection alias-free
    double dt = 1e-3;
    double t_end = 0.5;
    double alpha = 1.0;
    double nu = 1.0;
    double moll_width = 0.05;  // advecting-field mollification (space and time)
    bool reverse_mode_order = false;  // accumulation-order variant for repeat solves
};

struct EnergyLedger {
    std::vector<double> times;
    std::vector<double> energy;           // (|v|^2 + |H|^2)/2
    std::vector<double> dissipation_cum;  // nu int |.|_{H^alpha}^2
    std::vector<double> forcing_cum;      // |F1| + |F2| accumulated bounds
    double worst_violation = 0;           // max over steps of the (8-24) gap
    double final_energy = 0;
};

struct LinearizedState {
    GalerkinConfig config;
    std::vector<StokesMode> basis;
    std::vector<double> times;
    std::vector<std::vector<double>> v_coeff;  // [time][mode]
    std::vector<std::vector<double>> h_coeff;
    EnergyLedger ledger;

    VectorField velocity(std::size_t n, const GridSpec& g) const {
        return reconstruct_pn(v_coeff[n], basis, g);
    }
    VectorField magnetic(std::size_t n, const GridSpec& g) const {
        return reconstruct_pn(h_coeff[n], basis, g);
    }
};

/// Time-march the projected linearized system with the stiff part integrated
/// exactly (per-mode integrating factor) and explicit midpoint transport.
/// Advecting fields are mollified one-sidedly in time before use. Throws on
/// a CFL-style violation of the transport stability bound.
LinearizedState solve_linearized(const GalerkinConfig& config, const TimeField& advect_u,
                                 const TimeField& advect_b, const TimeField& noise_z1,
                                 const TimeField& noise_z2, const VectorField& v0,
                                 const VectorField& h0);

/// |<P_n((u . grad) f), f>| and the cross-term cancellation, computed on an
/// alias-free grid; both vanish discretely for divergence-free u.
struct CancellationReport {
    double self_term = 0;   // <P_n (u.grad) f, f>
    double cross_term = 0;  // <P_n (b.grad) h, v> + <P_n (b.grad) v, h>
    double scale = 0;
};
CancellationReport cancellation_check(const VectorField& u, const VectorField& b,
                                      const VectorField& v, const VectorField& h,
                                      const std::vector<StokesMode>& basis);

struct UniquenessReport {
    double repeat_difference = 0;   // same data, permuted accumulation order
    double zero_data_norm = 0;      // difference system driven by zero data
};
UniquenessReport uniqueness_check(const GalerkinConfig& config, const TimeField& advect_u,
                                  const TimeField& advect_b, const TimeField& noise_z1,
                                  const TimeField& noise_z2, const VectorField& v0,
                                  const VectorField& h0);

}  // namespace tmhd
