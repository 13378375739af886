#include "tmhd/field.hpp"

#include <cmath>

namespace tmhd {

ScalarField ScalarField::sample(const GridSpec& g,
                                const std::function<double(double, double, double)>& f) {
    ScalarField out(g);
    const int n = g.n_per_axis;
    std::size_t idx = 0;
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) out.values[idx++] = f(g.coord(ix), g.coord(iy), g.coord(iz));
    return out;
}

double ScalarField::mean() const {
    double s = 0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

VectorField VectorField::sample(const GridSpec& g,
                                const std::function<Vec3(double, double, double)>& f) {
    VectorField out(g);
    const int n = g.n_per_axis;
    std::size_t idx = 0;
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                Vec3 v = f(g.coord(ix), g.coord(iy), g.coord(iz));
                out.comp[0].values[idx] = v.x;
                out.comp[1].values[idx] = v.y;
                out.comp[2].values[idx] = v.z;
                ++idx;
            }
    return out;
}

TensorField::TensorField(const GridSpec& g, TensorSymmetry s) : grid(g), symmetry(s) {
    for (auto& c : comp) c = ScalarField(g);
}

double TensorField::symmetry_violation() const {
    double worst = 0;
    const std::size_t npts = grid.points();
    for (std::size_t p = 0; p < npts; ++p) {
        Mat3 m = point(p);
        switch (symmetry) {
            case TensorSymmetry::general:
                return 0.0;
            case TensorSymmetry::symmetric_tracefree: {
                for (int i = 0; i < 3; ++i)
                    for (int j = i + 1; j < 3; ++j)
                        worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
                worst = std::max(worst, std::abs(m.trace()));
                break;
            }
            case TensorSymmetry::skew: {
                for (int i = 0; i < 3; ++i)
                    for (int j = i; j < 3; ++j)
                        worst = std::max(worst, std::abs(m(i, j) + m(j, i)));
                break;
            }
        }
    }
    return worst;
}

void TensorField::enforce_symmetry(double tol) const {
    double v = symmetry_violation();
    if (v > tol) throw std::invalid_argument("TensorField: symmetry class violated, max " + std::to_string(v));
}

namespace {
void check_same(const GridSpec& a, const GridSpec& b) {
    if (a != b) throw std::invalid_argument("field arithmetic: grid mismatch");
}
}  // namespace

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    check_same(a.grid, b.grid);
    ScalarField r(a.grid);
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = a.values[i] + b.values[i];
    return r;
}
ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    check_same(a.grid, b.grid);
    ScalarField r(a.grid);
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = a.values[i] - b.values[i];
    return r;
}
ScalarField operator*(const ScalarField& a, const ScalarField& b) {
    check_same(a.grid, b.grid);
    ScalarField r(a.grid);
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = a.values[i] * b.values[i];
    return r;
}
ScalarField operator*(double s, const ScalarField& a) {
    ScalarField r(a.grid);
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = s * a.values[i];
    return r;
}

VectorField operator+(const VectorField& a, const VectorField& b) {
    VectorField r(a.grid);
    for (int c = 0; c < 3; ++c) r.comp[c] = a.comp[c] + b.comp[c];
    return r;
}
VectorField operator-(const VectorField& a, const VectorField& b) {
    VectorField r(a.grid);
    for (int c = 0; c < 3; ++c) r.comp[c] = a.comp[c] - b.comp[c];
    return r;
}
VectorField operator*(double s, const VectorField& a) {
    VectorField r(a.grid);
    for (int c = 0; c < 3; ++c) r.comp[c] = s * a.comp[c];
    return r;
}

TensorField operator+(const TensorField& a, const TensorField& b) {
    check_same(a.grid, b.grid);
    TensorField r(a.grid, a.symmetry == b.symmetry ? a.symmetry : TensorSymmetry::general);
    for (int c = 0; c < 9; ++c) r.comp[c] = a.comp[c] + b.comp[c];
    return r;
}
TensorField operator-(const TensorField& a, const TensorField& b) {
    check_same(a.grid, b.grid);
    TensorField r(a.grid, a.symmetry == b.symmetry ? a.symmetry : TensorSymmetry::general);
    for (int c = 0; c < 9; ++c) r.comp[c] = a.comp[c] - b.comp[c];
    return r;
}
TensorField operator*(double s, const TensorField& a) {
    TensorField r(a.grid, a.symmetry);
    for (int c = 0; c < 9; ++c) r.comp[c] = s * a.comp[c];
    return r;
}

TensorField outer_product(const VectorField& u, const VectorField& v) {
    check_same(u.grid, v.grid);
    TensorField r(u.grid);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.at(i, j) = u.comp[i] * v.comp[j];
    return r;
}

TensorField outer_product_traceless(const VectorField& u, const VectorField& v) {
    TensorField r = outer_product(u, v);
    const std::size_t npts = r.grid.points();
    for (std::size_t p = 0; p < npts; ++p) {
        double tr = (r.comp[0].values[p] + r.comp[4].values[p] + r.comp[8].values[p]) / 3.0;
        r.comp[0].values[p] -= tr;
        r.comp[4].values[p] -= tr;
        r.comp[8].values[p] -= tr;
    }
    return r;
}

double max_abs(const ScalarField& f) {
    double m = 0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}
double max_abs(const VectorField& f) {
    double m = 0;
    for (const auto& c : f.comp) m = std::max(m, max_abs(c));
    return m;
}
double max_abs(const TensorField& f) {
    double m = 0;
    for (const auto& c : f.comp) m = std::max(m, max_abs(c));
    return m;
}

}  // namespace tmhd
