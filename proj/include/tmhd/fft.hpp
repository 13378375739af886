#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace tmhd {

/// Real-to-complex 3D transforms on an n^3 periodic grid with plan reuse.
/// Physical storage is x-fastest: idx = (iz*n + iy)*n + ix.
/// Spectral storage is the half spectrum: idx = (iz*n + iy)*(n/2+1) + kx,
/// kx in [0, n/2]; y,z frequency index m maps to the wave number
/// m <= n/2 ? m : m-n. Coefficients are Fourier coefficients of
/// f(x) = sum_xi F(xi) exp(i xi.x), i.e. forward() divides by n^3.
class FftEngine {
  public:
    explicit FftEngine(int n);
    ~FftEngine();
    FftEngine(const FftEngine&) = delete;
    FftEngine& operator=(const FftEngine&) = delete;

    int n() const { return n_; }
    std::size_t real_size() const { return static_cast<std::size_t>(n_) * n_ * n_; }
    std::size_t cplx_size() const { return static_cast<std::size_t>(n_) * n_ * (n_ / 2 + 1); }

    void forward(const double* in, std::complex<double>* out) const;
    void inverse(const std::complex<double>* in, double* out) const;

    /// Shared engine per grid size.
    static FftEngine& get(int n);

  private:
    int n_;
    void* plan_fwd_;
    void* plan_inv_;
    double* real_buf_;
    void* cplx_buf_;
};

/// Integer wave number for frequency index m on an n-grid (full dimensions).
inline int wavenumber(int m, int n) { return m <= n / 2 ? m : m - n; }

}  // namespace tmhd
