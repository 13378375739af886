#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tmhd/vec3.hpp"

namespace tmhd {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Uniform collocation grid for the periodic box of side 2*pi.
struct GridSpec {
    int n_per_axis = 0;
    double dealias_factor = 1.5;

    GridSpec() = default;
    explicit GridSpec(int n, double dealias = 1.5) : n_per_axis(n), dealias_factor(dealias) {
        if (n < 2 || (n & 1)) throw std::invalid_argument("GridSpec: n_per_axis must be even");
        if (dealias < 1.0) throw std::invalid_argument("GridSpec: dealias_factor must be >= 1");
    }

    std::size_t points() const {
        return static_cast<std::size_t>(n_per_axis) * n_per_axis * n_per_axis;
    }
    double coord(int i) const { return kTwoPi * i / n_per_axis; }
    double spacing() const { return kTwoPi / n_per_axis; }
    int nyquist() const { return n_per_axis / 2; }
    bool operator==(const GridSpec& o) const { return n_per_axis == o.n_per_axis; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

struct ScalarField {
    GridSpec grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const GridSpec& g) : grid(g), values(g.points(), 0.0) {}

    double& at(int ix, int iy, int iz) {
        const int n = grid.n_per_axis;
        return values[(static_cast<std::size_t>(iz) * n + iy) * n + ix];
    }
    double at(int ix, int iy, int iz) const {
        const int n = grid.n_per_axis;
        return values[(static_cast<std::size_t>(iz) * n + iy) * n + ix];
    }

    /// Sample a function of the grid point coordinates.
    static ScalarField sample(const GridSpec& g, const std::function<double(double, double, double)>& f);

    double mean() const;
};

struct VectorField {
    GridSpec grid;
    std::array<ScalarField, 3> comp;

    VectorField() = default;
    explicit VectorField(const GridSpec& g) : grid(g), comp{ScalarField(g), ScalarField(g), ScalarField(g)} {}

    ScalarField& operator[](int i) { return comp[i]; }
    const ScalarField& operator[](int i) const { return comp[i]; }

    static VectorField sample(const GridSpec& g, const std::function<Vec3(double, double, double)>& f);
};

enum class TensorSymmetry { general, symmetric_tracefree, skew };

struct TensorField {
    GridSpec grid;
    TensorSymmetry symmetry = TensorSymmetry::general;
    std::array<ScalarField, 9> comp;  // row-major (i,j)

    TensorField() = default;
    explicit TensorField(const GridSpec& g, TensorSymmetry s = TensorSymmetry::general);

    ScalarField& at(int i, int j) { return comp[3 * i + j]; }
    const ScalarField& at(int i, int j) const { return comp[3 * i + j]; }

    Mat3 point(std::size_t idx) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.m[i] = comp[i].values[idx];
        return m;
    }
    void set_point(std::size_t idx, const Mat3& m) {
        for (int i = 0; i < 9; ++i) comp[i].values[idx] = m.m[i];
    }

    TensorField transposed_copy() const {
        TensorField r(grid, symmetry);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
        return r;
    }

    /// Max pointwise violation of the declared symmetry class.
    double symmetry_violation() const;
    /// Throws when the class is violated beyond tol.
    void enforce_symmetry(double tol = 1e-10) const;
};

// Pointwise arithmetic helpers (fields must share grids).
ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double s, const ScalarField& a);
VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField operator*(double s, const VectorField& a);
TensorField operator+(const TensorField& a, const TensorField& b);
TensorField operator-(const TensorField& a, const TensorField& b);
TensorField operator*(double s, const TensorField& a);

/// outer(u,v)_ij = u_i v_j pointwise.
TensorField outer_product(const VectorField& u, const VectorField& v);
/// u x v - (1/3) tr Id, pointwise traceless tensor product.
TensorField outer_product_traceless(const VectorField& u, const VectorField& v);

double max_abs(const ScalarField& f);
double max_abs(const VectorField& f);
double max_abs(const TensorField& f);

/// Time grid plus one frame per instant, all frames on a shared grid.
template <class FieldT>
struct TimeSeries {
    std::vector<double> times;
    std::vector<FieldT> frames;

    std::size_t size() const { return times.size(); }
    void push(double t, FieldT f) {
        if (!times.empty() && t <= times.back())
            throw std::invalid_argument("TimeSeries: times must be strictly increasing");
        times.push_back(t);
        frames.push_back(std::move(f));
    }
};

using TimeSeriesScalar = TimeSeries<ScalarField>;
using TimeSeriesVector = TimeSeries<VectorField>;
using TimeSeriesTensor = TimeSeries<TensorField>;

}  // namespace tmhd
