#include "tmhd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tmhd {

namespace {

FracVec3 fv(std::int64_t ax, std::int64_t ay, std::int64_t az, std::int64_t den) {
    return {Fraction(ax, den), Fraction(ay, den), Fraction(az, den)};
}

Vec3 to_d(const FracVec3& v) { return {v.x.to_double(), v.y.to_double(), v.z.to_double()}; }

void require(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error("build_geometric_basis: violated: " + what);
}

void verify_frame(const WaveVectorFrame& f) {
    const Fraction one(1);
    require(frac_dot(f.k, f.k) == one, "|k| = 1");
    require(frac_dot(f.k1, f.k1) == one, "|k1| = 1");
    require(frac_dot(f.k2, f.k2) == one, "|k2| = 1");
    require(frac_dot(f.k, f.k1).is_zero(), "k . k1 = 0");
    require(frac_dot(f.k, f.k2).is_zero(), "k . k2 = 0");
    require(frac_dot(f.k1, f.k2).is_zero(), "k1 . k2 = 0");
}

WaveVectorFrame make_frame(const FracVec3& k, const FracVec3& k1) {
    WaveVectorFrame f;
    f.k = k;
    f.k1 = k1;
    f.k2 = frac_cross(k, k1);  // right-handed by construction
    f.kd = to_d(f.k);
    f.k1d = to_d(f.k1);
    f.k2d = to_d(f.k2);
    verify_frame(f);
    return f;
}

bool frac_vec_less(const FracVec3& a, const FracVec3& b) {
    for (int i = 0; i < 3; ++i) {
        if (a[i] < b[i]) return true;
        if (b[i] < a[i]) return false;
    }
    return false;
}

bool frac_vec_eq(const FracVec3& a, const FracVec3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
}

// Gaussian elimination over the rationals; returns the inverse.
template <int N>
std::array<std::array<Fraction, N>, N> rational_inverse(std::array<std::array<Fraction, N>, N> m,
                                                        const char* what) {
    std::array<std::array<Fraction, N>, N> inv{};
    for (int i = 0; i < N; ++i) inv[i][i] = Fraction(1);
    for (int col = 0; col < N; ++col) {
        int piv = -1;
        for (int r = col; r < N; ++r)
            if (!m[r][col].is_zero()) {
                piv = r;
                break;
            }
        require(piv >= 0, std::string(what) + " spans (matrix invertible)");
        std::swap(m[piv], m[col]);
        std::swap(inv[piv], inv[col]);
        Fraction d = m[col][col];
        for (int c = 0; c < N; ++c) {
            m[col][c] = m[col][c] / d;
            inv[col][c] = inv[col][c] / d;
        }
        for (int r = 0; r < N; ++r) {
            if (r == col || m[r][col].is_zero()) continue;
            Fraction f = m[r][col];
            for (int c = 0; c < N; ++c) {
                m[r][c] = m[r][c] - f * m[col][c];
                inv[r][c] = inv[r][c] - f * inv[col][c];
            }
        }
    }
    return inv;
}

Mat3 skew_axis_matrix(const Vec3& a) {
    Mat3 m;
    m(0, 1) = -a.z;
    m(1, 0) = a.z;
    m(0, 2) = a.y;
    m(2, 0) = -a.y;
    m(1, 2) = -a.x;
    m(2, 1) = a.x;
    return m;
}

}  // namespace

GeometricBasis build_geometric_basis() {
    GeometricBasis b;

    // Velocity family: two role-swapped Pythagorean frames per coordinate
    // plane; with equal weights 1/2 the k1 (x) k1 sum is exactly the identity.
    std::vector<WaveVectorFrame> lu = {
        make_frame(fv(3, 4, 0, 5), fv(-4, 3, 0, 5)),
        make_frame(fv(4, -3, 0, 5), fv(3, 4, 0, 5)),
        make_frame(fv(0, 3, 4, 5), fv(0, -4, 3, 5)),
        make_frame(fv(0, 4, -3, 5), fv(0, 3, 4, 5)),
        make_frame(fv(4, 0, 3, 5), fv(-3, 0, 4, 5)),
        make_frame(fv(-3, 0, 4, 5), fv(4, 0, 3, 5)),
    };
    // Magnetic family: +/- pairs of three independent directions; all frames
    // right-handed so each skew generator is the cross-product matrix of k.
    // Same denominator as lambda_u keeps the common integer scale at 5, which
    // is what makes toy-regime shear frequencies representable on a grid.
    std::vector<WaveVectorFrame> lb = {
        make_frame(fv(4, 3, 0, 5), fv(-3, 4, 0, 5)),
        make_frame(fv(-4, -3, 0, 5), fv(-3, 4, 0, 5)),
        make_frame(fv(0, 4, 3, 5), fv(0, -3, 4, 5)),
        make_frame(fv(0, -4, -3, 5), fv(0, -3, 4, 5)),
        make_frame(fv(3, 0, 4, 5), fv(-4, 0, 3, 5)),
        make_frame(fv(-3, 0, -4, 5), fv(-4, 0, 3, 5)),
    };
    auto by_k = [](const WaveVectorFrame& a, const WaveVectorFrame& c) {
        return frac_vec_less(a.k, c.k);
    };
    std::sort(lu.begin(), lu.end(), by_k);
    std::sort(lb.begin(), lb.end(), by_k);
    b.lambda_u = std::move(lu);
    b.lambda_b = std::move(lb);

    for (const auto& fu : b.lambda_u)
        for (const auto& fb : b.lambda_b)
            require(!frac_vec_eq(fu.k, fb.k), "lambda_u and lambda_b disjoint");

    // Common integer scale N: N*k, N*k1, N*k2 all integer vectors.
    std::int64_t n = 1;
    for (std::size_t i = 0; i < b.total_frames(); ++i) {
        const auto& f = b.frame(i);
        for (const FracVec3* v : {&f.k, &f.k1, &f.k2})
            for (int c = 0; c < 3; ++c) n = lcm64(n, (*v)[c].den);
    }
    b.n_lambda = n;

    // Symmetric-family dual: invert the 6x6 matrix whose columns are the
    // coordinates (11,22,33,12,13,23) of k1 (x) k1.
    std::array<std::array<Fraction, 6>, 6> msym{};
    for (int i = 0; i < 6; ++i) {
        const FracVec3& v = b.lambda_u[i].k1;
        std::array<Fraction, 6> col = {v.x * v.x, v.y * v.y, v.z * v.z,
                                       v.x * v.y, v.x * v.z, v.y * v.z};
        for (int r = 0; r < 6; ++r) msym[r][i] = col[r];
    }
    auto inv = rational_inverse<6>(msym, "lambda_u generators");
    for (int i = 0; i < 6; ++i) {
        Fraction ci = inv[i][0] + inv[i][1] + inv[i][2];  // coefficients of Id
        require(Fraction(0) < ci, "identity strictly inside the positive cone");
    }
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) b.sym_dual[i][j] = inv[i][j].to_double();

    // Skew family: the generator axes are the k vectors; invert the 3x3
    // matrix of the positive representatives.
    std::vector<int> positive_rep;
    for (int i = 0; i < 6; ++i) {
        const FracVec3& k = b.lambda_b[i].k;
        if (frac_vec_less(frac_neg(k), k)) positive_rep.push_back(i);
    }
    require(positive_rep.size() == 3, "three +/- direction pairs in lambda_b");
    std::array<std::array<Fraction, 3>, 3> kset{};
    for (int c = 0; c < 3; ++c) {
        const FracVec3& k = b.lambda_b[positive_rep[c]].k;
        for (int r = 0; r < 3; ++r) kset[r][c] = k[r];
        bool found = false;
        for (int i = 0; i < 6; ++i)
            if (frac_vec_eq(b.lambda_b[i].k, frac_neg(k))) found = true;
        require(found, "role-swapped pair present for every lambda_b direction");
    }
    auto kinv = rational_inverse<3>(kset, "lambda_b directions");
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b.skew_inv[i][j] = kinv[i][j].to_double();
    for (int i = 0; i < 6; ++i) {
        const FracVec3& k = b.lambda_b[i].k;
        bool positive = frac_vec_less(frac_neg(k), k);
        const FracVec3 rep = positive ? k : frac_neg(k);
        int which = -1;
        for (int c2 = 0; c2 < 3; ++c2)
            if (frac_vec_eq(b.lambda_b[positive_rep[c2]].k, rep)) which = c2;
        require(which >= 0, "pair bookkeeping");
        b.skew_pair[i] = {which, positive ? +1 : -1};
    }

    // The skew generators really are cross-product matrices, and equal
    // weights cancel at the zero matrix.
    Mat3 gsum;
    for (int i = 0; i < 6; ++i) {
        const auto& f = b.lambda_b[i];
        Mat3 gen = outer(f.k2d, f.k1d) - outer(f.k1d, f.k2d);
        require(frobenius(gen - skew_axis_matrix(f.kd)) < 1e-14, "skew generator equals [k]_x");
        gsum += gen;
    }
    require(frobenius(gsum) < 1e-14, "paired skew generators cancel at zero");

    // Positivity radii: half the exact distance from the center to the
    // positivity boundary of the affine coefficients, in Frobenius norm.
    double dist_u = 1e300;
    for (int i = 0; i < 6; ++i) {
        // Frobenius representer: diagonal entries as-is, off-diagonal weight
        // (M^-1)_ij/2 on both symmetric slots.
        double g2 = 0;
        for (int j = 0; j < 3; ++j) g2 += b.sym_dual[i][j] * b.sym_dual[i][j];
        for (int j = 3; j < 6; ++j) g2 += b.sym_dual[i][j] * b.sym_dual[i][j] / 2.0;
        dist_u = std::min(dist_u, 0.5 / std::sqrt(g2));
    }
    b.eps_u = 0.5 * dist_u;

    double dist_b = 1e300;
    for (int i = 0; i < 3; ++i) {
        double r2 = 0;
        for (int j = 0; j < 3; ++j) r2 += b.skew_inv[i][j] * b.skew_inv[i][j];
        // gamma^2 = 1/2 +- t_i/2 hits zero at |t_i| = 1;
        // |t_i| <= |row| |axis| = |row| |A|_F / sqrt(2)
        dist_b = std::min(dist_b, std::sqrt(2.0) / std::sqrt(r2));
    }
    b.eps_b = 0.5 * dist_b;

    {
        auto g = b.gamma_sym(Mat3::identity());
        require(frobenius(b.reconstruct_sym(g) - Mat3::identity()) < 1e-13,
                "identity reconstruction");
        for (double v : g) require(std::abs(v * v - 0.5) < 1e-13, "gamma^2(Id) = 1/2");
        auto gz = b.gamma_skew(Mat3{});
        require(frobenius(b.reconstruct_skew(gz)) < 1e-13, "zero reconstruction");
        for (double v : gz) require(std::abs(v * v - 0.5) < 1e-13, "gamma^2(0) = 1/2");
    }

    b.m_star = estimate_m_star(b);
    return b;
}

std::vector<double> GeometricBasis::gamma_sym(const Mat3& s) const {
    if (frobenius(s - s.transposed()) > 1e-10 * std::max(1.0, frobenius(s)))
        throw std::invalid_argument("gamma_sym: input not symmetric");
    if (frobenius(s - Mat3::identity()) > eps_u * (1 + 1e-12))
        throw std::domain_error("gamma_sym: |S - Id| exceeds eps_u");
    std::array<double, 6> coords = {s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(0, 2), s(1, 2)};
    std::vector<double> out(6);
    for (int i = 0; i < 6; ++i) {
        double c = 0;
        for (int j = 0; j < 6; ++j) c += sym_dual[i][j] * coords[j];
        if (c <= 0) throw std::domain_error("gamma_sym: coefficient not positive");
        out[i] = std::sqrt(c);
    }
    return out;
}

std::vector<double> GeometricBasis::gamma_skew(const Mat3& a) const {
    if (frobenius(a + a.transposed()) > 1e-10 * std::max(1.0, frobenius(a)))
        throw std::invalid_argument("gamma_skew: input not skew");
    if (frobenius(a) > eps_b * (1 + 1e-12))
        throw std::domain_error("gamma_skew: |A| exceeds eps_b");
    Vec3 axis = {a(2, 1), a(0, 2), a(1, 0)};
    double t[3];
    for (int i = 0; i < 3; ++i)
        t[i] = skew_inv[i][0] * axis.x + skew_inv[i][1] * axis.y + skew_inv[i][2] * axis.z;

    std::vector<double> out(6);
    for (int i = 0; i < 6; ++i) {
        auto [which, sign] = skew_pair[i];
        double c = 0.5 + 0.5 * sign * t[which];
        if (c <= 0) throw std::domain_error("gamma_skew: coefficient not positive");
        out[i] = std::sqrt(c);
    }
    return out;
}

Mat3 GeometricBasis::reconstruct_sym(const std::vector<double>& gamma) const {
    Mat3 acc;
    for (std::size_t i = 0; i < lambda_u.size(); ++i)
        acc += (gamma[i] * gamma[i]) * outer(lambda_u[i].k1d, lambda_u[i].k1d);
    return acc;
}

Mat3 GeometricBasis::reconstruct_skew(const std::vector<double>& gamma) const {
    Mat3 acc;
    for (std::size_t i = 0; i < lambda_b.size(); ++i) {
        Mat3 gen = outer(lambda_b[i].k2d, lambda_b[i].k1d) - outer(lambda_b[i].k1d, lambda_b[i].k2d);
        acc += (gamma[i] * gamma[i]) * gen;
    }
    return acc;
}

double estimate_m_star(const GeometricBasis& basis, double scale) {
    // gamma = sqrt of an affine functional with center value 1/2 and
    // gradient norm g; chain-rule bounds of sqrt give the C^4 sum.
    auto family = [&](bool velocity) {
        double total = 0;
        double eps = (velocity ? basis.eps_u : basis.eps_b) * scale;
        for (int i = 0; i < 6; ++i) {
            double g = 0;
            if (velocity) {
                double g2 = 0;
                for (int j = 0; j < 3; ++j) g2 += basis.sym_dual[i][j] * basis.sym_dual[i][j];
                for (int j = 3; j < 6; ++j) g2 += basis.sym_dual[i][j] * basis.sym_dual[i][j] / 2.0;
                g = std::sqrt(g2);
            } else {
                int which = i / 2;
                double r2 = 0;
                for (int j = 0; j < 3; ++j) r2 += basis.skew_inv[which][j] * basis.skew_inv[which][j];
                g = 0.5 * std::sqrt(r2) / std::sqrt(2.0);
            }
            double cmin = 0.5 - eps * g;
            double cmax = 0.5 + eps * g;
            if (cmin <= 0) return 1e300;  // past the positivity boundary
            double term = std::sqrt(cmax);
            const double coef[4] = {0.5, 0.25, 0.375, 0.9375};  // (2m-3)!!/2^m
            double gp = g;
            for (int m = 1; m <= 4; ++m) {
                term += coef[m - 1] * gp * std::pow(cmin, -(2.0 * m - 1.0) / 2.0);
                gp *= g;
            }
            total += term;
        }
        return total;
    };
    return family(true) + family(false);
}

std::string GeometricBasis::to_json() const {
    nlohmann::json j;
    auto frame_json = [](const WaveVectorFrame& f) {
        auto vecj = [](const FracVec3& v) {
            return nlohmann::json::array({{v.x.num, v.x.den}, {v.y.num, v.y.den}, {v.z.num, v.z.den}});
        };
        return nlohmann::json{{"k", vecj(f.k)}, {"k1", vecj(f.k1)}, {"k2", vecj(f.k2)}};
    };
    for (const auto& f : lambda_u) j["lambda_u"].push_back(frame_json(f));
    for (const auto& f : lambda_b) j["lambda_b"].push_back(frame_json(f));
    j["n_lambda"] = n_lambda;
    j["eps_u"] = eps_u;
    j["eps_b"] = eps_b;
    j["m_star"] = m_star;
    return j.dump(2);
}

}  // namespace tmhd
