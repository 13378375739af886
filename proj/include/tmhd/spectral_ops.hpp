#pragma once

#include <complex>
#include <vector>

#include "tmhd/fft.hpp"
#include "tmhd/field.hpp"

namespace tmhd {

/// Half-spectrum coefficients of a real scalar field (see FftEngine layout).
struct Spectrum {
    int n = 0;
    std::vector<std::complex<double>> c;

    explicit Spectrum(int n_ = 0)
        : n(n_), c(static_cast<std::size_t>(n_) * n_ * (n_ / 2 + 1), {0.0, 0.0}) {}

    std::complex<double>& at(int kx, int my, int mz) {
        return c[(static_cast<std::size_t>(mz) * n + my) * (n / 2 + 1) + kx];
    }
    std::complex<double> at(int kx, int my, int mz) const {
        return c[(static_cast<std::size_t>(mz) * n + my) * (n / 2 + 1) + kx];
    }
};

Spectrum to_spectrum(const ScalarField& f);
ScalarField to_physical(const Spectrum& s, const GridSpec& g);

std::array<Spectrum, 3> to_spectrum(const VectorField& f);
VectorField to_physical(const std::array<Spectrum, 3>& s, const GridSpec& g);

/// Apply a real multiplier depending on the integer wave vector.
template <class Fn>
void apply_multiplier(Spectrum& s, Fn&& mult) {
    const int n = s.n, nh = n / 2 + 1;
    std::size_t idx = 0;
    for (int mz = 0; mz < n; ++mz) {
        const int kz = wavenumber(mz, n);
        for (int my = 0; my < n; ++my) {
            const int ky = wavenumber(my, n);
            for (int kx = 0; kx < nh; ++kx) s.c[idx++] *= mult(kx, ky, kz);
        }
    }
}

// --- differential and projection operators -------------------------------

/// Fractional Laplacian (-Delta)^alpha via the |xi|^{2 alpha} symbol.
VectorField frac_laplacian(const VectorField& f, double alpha);
ScalarField frac_laplacian(const ScalarField& f, double alpha);

/// Helmholtz/Leray projection Id - grad Delta^{-1} div. Leaves the mean mode.
VectorField leray_project(const VectorField& f);

/// Inverse divergence onto symmetric trace-free tensors; requires mean-free input.
TensorField inv_div_sym(const VectorField& v, double mean_tol = 1e-9);
/// Inverse divergence onto skew tensors; requires divergence-free input.
TensorField inv_div_skew(const VectorField& f, double div_tol = 1e-8);

/// Row-wise divergence (div A)_i = sum_j d_j A_ij.
VectorField tensor_divergence(const TensorField& a);

ScalarField divergence(const VectorField& f);
VectorField gradient(const ScalarField& f);
VectorField curl(const VectorField& f);

/// L2 norm of div f, for preconditions and invariants.
double divergence_l2(const VectorField& f);

/// || |grad|^{-1} P_{!=0} f ||_{L2}; the residual norm used by the step checks.
double inv_grad_l2(const VectorField& f);

/// Sharp Fourier cutoffs by |xi|.
ScalarField low_pass(const ScalarField& f, double radius);
VectorField low_pass(const VectorField& f, double radius);
ScalarField high_pass(const ScalarField& f, double radius);
/// Remove the spatial mean.
ScalarField remove_mean(const ScalarField& f);
VectorField remove_mean(const VectorField& f);

// --- mollification --------------------------------------------------------

/// Spatial mollification by the unit-mass C^inf bump at scale ell,
/// applied as the kernel's Fourier transform on each mode.
ScalarField mollify_space(const ScalarField& f, double ell);
VectorField mollify_space(const VectorField& f, double ell);
TensorField mollify_space(const TensorField& f, double ell);

/// Fourier transform of the normalized spatial bump at radial frequency k.
double space_kernel_symbol(double k_times_ell);

/// One-sided temporal mollifier weights on a uniform grid of spacing dt:
/// w[j] multiplies the frame at t - j*dt, sum w = 1, w[0] refers to time t.
/// Throws when ell < dt (unresolvable kernel).
std::vector<double> time_mollifier_weights(double ell, double dt);

/// Causal temporal mollification of a time series (frames before t=0 are zero).
TimeSeriesVector mollify_time(const TimeSeriesVector& f, double ell);
TimeSeriesTensor mollify_time(const TimeSeriesTensor& f, double ell);

// --- norms -----------------------------------------------------------------

/// L^p norm over the box (quadrature on the grid; p=inf returns the max).
double lp_norm(const ScalarField& f, double p);
double lp_norm(const VectorField& f, double p);  // pointwise Euclidean magnitude
double lp_norm(const TensorField& f, double p);  // pointwise Frobenius magnitude

/// W^{s,p}: integer s sums ||grad^zeta f||_p over multi-indices |zeta| <= s;
/// non-integer s uses the Bessel multiplier (1+|xi|^2)^{s/2}.
double sobolev_norm(const ScalarField& f, double s, double p);
double sobolev_norm(const VectorField& f, double s, double p);

/// Sum of squared spectral magnitudes times (2 pi)^3 (Parseval pairing).
double spectral_energy(const ScalarField& f);

// --- products ---------------------------------------------------------------

/// Product with 3/2-rule zero padding; exact for band-limited factors.
ScalarField dealiased_product(const ScalarField& a, const ScalarField& b);

}  // namespace tmhd
