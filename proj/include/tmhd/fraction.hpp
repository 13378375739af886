#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tmhd {

/// Exact rational with int64 numerator/denominator. Throws on overflow;
/// the geometry module only ever manipulates small Pythagorean fractions,
/// so an overflow indicates a construction bug rather than a size problem.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t n) : num(n), den(1) {}
    Fraction(std::int64_t n, std::int64_t d);

    Fraction operator+(const Fraction& o) const;
    Fraction operator-(const Fraction& o) const;
    Fraction operator*(const Fraction& o) const;
    Fraction operator/(const Fraction& o) const;
    Fraction operator-() const { return {-num, den}; }

    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Fraction& o) const { return !(*this == o); }
    bool operator<(const Fraction& o) const;

    bool is_zero() const { return num == 0; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
};

std::int64_t gcd64(std::int64_t a, std::int64_t b);
std::int64_t lcm64(std::int64_t a, std::int64_t b);

struct FracVec3 {
    Fraction x, y, z;
    Fraction operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Fraction frac_dot(const FracVec3& a, const FracVec3& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline FracVec3 frac_cross(const FracVec3& a, const FracVec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline FracVec3 frac_neg(const FracVec3& a) { return {-a.x, -a.y, -a.z}; }

}  // namespace tmhd
