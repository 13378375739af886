#include "tmhd/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <stdexcept>

namespace tmhd {

FftEngine::FftEngine(int n) : n_(n) {
    if (n < 2 || (n & 1)) throw std::invalid_argument("FftEngine: n must be even and >= 2");
    real_buf_ = fftw_alloc_real(real_size());
    cplx_buf_ = fftw_alloc_complex(cplx_size());
    // FFTW_ESTIMATE keeps planning deterministic run to run.
    plan_fwd_ = fftw_plan_dft_r2c_3d(n, n, n, real_buf_,
                                     reinterpret_cast<fftw_complex*>(cplx_buf_), FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_3d(n, n, n, reinterpret_cast<fftw_complex*>(cplx_buf_),
                                     real_buf_, FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_inv_) throw std::runtime_error("FftEngine: planning failed");
}

FftEngine::~FftEngine() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
    fftw_free(real_buf_);
    fftw_free(cplx_buf_);
}

void FftEngine::forward(const double* in, std::complex<double>* out) const {
    std::memcpy(real_buf_, in, real_size() * sizeof(double));
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    const double scale = 1.0 / static_cast<double>(real_size());
    auto* c = reinterpret_cast<std::complex<double>*>(cplx_buf_);
    for (std::size_t i = 0; i < cplx_size(); ++i) out[i] = c[i] * scale;
}

void FftEngine::inverse(const std::complex<double>* in, double* out) const {
    std::memcpy(cplx_buf_, in, cplx_size() * sizeof(std::complex<double>));
    fftw_execute(static_cast<fftw_plan>(plan_inv_));
    std::memcpy(out, real_buf_, real_size() * sizeof(double));
}

FftEngine& FftEngine::get(int n) {
    static std::map<int, std::unique_ptr<FftEngine>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<FftEngine>(n)).first;
    return *it->second;
}

}  // namespace tmhd
