#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tmhd/amplitudes.hpp"
#include "tmhd/building_blocks.hpp"
#include "tmhd/field.hpp"
#include "tmhd/geometry.hpp"
#include "tmhd/stochastic.hpp"

namespace tmhd {

/// One time index of the relaxed system.
struct RelaxedFrame {
    VectorField u, b;
    TensorField ru, rb;
};

/// Frame access for one iteration level; implementations cache internally.
class FrameSource {
  public:
    virtual ~FrameSource() = default;
    virtual std::shared_ptr<const RelaxedFrame> frame(std::size_t n) const = 0;
    /// Fields-only access; the default builds the full frame.
    virtual VectorField velocity(std::size_t n) const { return frame(n)->u; }
    virtual VectorField magnetic(std::size_t n) const { return frame(n)->b; }
};

/// Closed-form time-dependent field (the q = 0 inputs v, H).
using AnalyticVectorField = std::function<VectorField(double t, const GridSpec&)>;

struct RelaxedState {
    int q = 0;
    IterParams params;
    GridSpec grid;
    std::vector<double> times;
    std::shared_ptr<const GeometricBasis> basis;
    std::shared_ptr<const NoiseState> noise;
    std::shared_ptr<FrameSource> fields;
    double noise_cutoff = 0;  // min(lambda_q^15, Nyquist); capped flag below
    bool noise_capped = false;

    double dt() const { return times[1] - times[0]; }
    /// z_{i,q} at a path index.
    VectorField z_q(int channel, std::size_t n) const;
};

/// q = 0 initialization from smooth divergence-free fields vanishing at t=0.
/// The Reynolds and magnetic stresses are built with the same time stencil
/// the residual check uses, so the q = 0 residual vanishes to roundoff.
RelaxedState init_state(const AnalyticVectorField& v, const AnalyticVectorField& h,
                        std::shared_ptr<const NoiseState> noise, const IterParams& params,
                        const GridSpec& grid, const std::vector<double>& times,
                        std::shared_ptr<const GeometricBasis> basis);

struct ResidualReport {
    double res_u = 0;              // H^{-1}-type norm, Leray projected
    double res_b = 0;
    double field_scale = 0;        // max field magnitude over the tested frames
    bool boundary_stencils = false;
    std::vector<std::size_t> tested;
};

/// Residual of the relaxed system on the state's own fields at the given
/// path indices (4th order central differencing; one-sided at the ends,
/// flagged in the report).
ResidualReport residual_check(const RelaxedState& state, std::vector<std::size_t> test_indices);

struct Diagnostics {
    double j_q = 0, j_tilde_q = 0;        // input-level stress norms (sampled)
    double j_next = 0, j_tilde_next = 0;  // output level
    double decay_ratio = 0;               // j_tilde_next / j_tilde_q
    double delta_next = 0, delta_next2 = 0;
    double pert_l2_tx = 0;                // perturbation norms over sampled frames
    double pert_l1t_l2x = 0;
    double pert_lgamma_wsp = 0;
    double s_norm = 0, gamma_norm = 2, p_norm = 2;  // the (s, gamma, p) used above
    double m_initial = 0;                 // |u0|_2 + |B0|_2
    double l_noise = 0;                   // measured noise magnitude stand-in
    double m_star = 0;
    double res_u = 0, res_b = 0;
    bool noise_truncation_capped = false;
    std::vector<std::string> notes;
};

struct StepOptions {
    std::vector<std::size_t> residual_indices;   // defaults chosen if empty
    std::vector<std::size_t> diagnostic_indices; // frames for J and norms
    double s_norm = 0.0, gamma_norm = 2.0, p_norm = 2.0;
};

struct StepResult {
    RelaxedState next;
    Diagnostics diag;
};

/// Stress component labels of the q -> q+1 assembly.
enum class StressPart { lin, corr, com1, com2, osc1, osc2, osc3 };

/// The q -> q+1 engine: mollification, amplitudes, perturbations and stress
/// assembly evaluated lazily per path index with windowed caches.
class StepPipeline {
  public:
    StepPipeline(const RelaxedState& state);

    const RelaxedState& input() const { return state_; }
    double theta(double t) const;      // initial-time cutoff Theta_{q+1}
    double theta_dt(double t) const;

    // mollified level-q objects
    std::shared_ptr<const RelaxedFrame> mollified(std::size_t n) const;
    VectorField z_moll(int channel, std::size_t n) const;       // z_{i,ell}
    VectorField z_next(int channel, std::size_t n) const;       // z_{i,q+1}
    TensorField commutator_stress_u(std::size_t n) const;       // com1 parts
    TensorField commutator_stress_b(std::size_t n) const;

    // amplitude slices built from the mollified stresses
    struct AmplitudeFrame {
        AmplitudeSlice mag;
        TensorField gb;
        AmplitudeSlice vel;
    };
    std::shared_ptr<const AmplitudeFrame> amplitudes(std::size_t n) const;

    struct PerturbationFrame {
        VectorField w_p, w_pc, w_o;   // untruncated pieces at this time
        VectorField d_p, d_pc, d_o;
        VectorField w_total, d_total; // Theta w_pc + Theta^2 w_o etc.
    };
    std::shared_ptr<const PerturbationFrame> perturbation(std::size_t n) const;

    TensorField stress_piece_u(StressPart part, std::size_t n) const;
    TensorField stress_piece_b(StressPart part, std::size_t n) const;
    TensorField stress_total_u(std::size_t n) const;
    TensorField stress_total_b(std::size_t n) const;

    VectorField velocity_next(std::size_t n) const;  // u_ell + w
    VectorField magnetic_next(std::size_t n) const;

    /// Direct evaluation of the near-initial-time closed forms; valid where
    /// Theta vanishes identically around the index.
    TensorField near_initial_stress_u(std::size_t n) const;
    TensorField near_initial_stress_b(std::size_t n) const;

    const TemporalBlockSet& blocks() const { return blocks_; }
    const ShearFlowSet& flows() const { return flows_; }

    /// g_(k) values for all frames at a path time.
    std::vector<double> g_at(double t) const;

  private:
    RelaxedState state_;
    ShearFlowSet flows_;
    TemporalBlockSet blocks_;
    std::vector<double> moll_weights_;
    std::vector<Mat3> mean_ww_;   // per frame: x-mean of W (x) W
    std::vector<Mat3> mean_dd_;   // magnetic frames: mean of D (x) D
    std::vector<Mat3> mean_dw_;   // magnetic frames: mean of D (x) W - W (x) D

    mutable std::map<std::size_t, std::shared_ptr<const RelaxedFrame>> moll_cache_;
    mutable std::map<std::size_t, std::shared_ptr<const AmplitudeFrame>> amp_cache_;
    mutable std::map<std::size_t, std::shared_ptr<const PerturbationFrame>> pert_cache_;
    void trim_caches() const;

    ScalarField amp_field_dt(std::size_t frame_idx, std::size_t n, bool squared) const;
    VectorField perturbation_dt_pc(std::size_t n, bool magnetic) const;
};

/// One full iteration: mollify, build amplitudes and perturbations, assemble
/// stresses, wrap the q+1 state, and run residual and diagnostics.
StepResult step(const RelaxedState& state, const StepOptions& opts = {});

/// Path indices whose full time stencil stays clear of the temporal bump
/// supports and of the initial-time ramp; there the construction is slow in
/// time and the finite-difference residual is meaningful at desk time grids.
std::vector<std::size_t> quiet_residual_indices(const RelaxedState& state, std::size_t count);

/// Pressure at one index, reconstructed from the velocity equation.
ScalarField reconstruct_pressure(const RelaxedState& state, std::size_t n);

/// 4th order first-derivative stencil over the path grid (one-sided at the
/// ends); shared by init_state, the pipeline and residual_check.
std::vector<std::pair<long, double>> time_stencil(std::size_t n, std::size_t count, double dt);

}  // namespace tmhd
