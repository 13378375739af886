#include "tmhd/fraction.hpp"

namespace tmhd {

std::int64_t gcd64(std::int64_t a, std::int64_t b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        std::int64_t t = a % b;
        a = b;
        b = t;
    }
    return a;
}

std::int64_t lcm64(std::int64_t a, std::int64_t b) {
    if (a == 0 || b == 0) return 0;
    return a / gcd64(a, b) * b;
}

namespace {

std::int64_t checked(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("Fraction overflow");
    return static_cast<std::int64_t>(v);
}

Fraction make(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("Fraction: zero denominator");
    if (d < 0) {
        n = -n;
        d = -d;
    }
    std::int64_t nn = checked(n), dd = checked(d);
    std::int64_t g = gcd64(nn, dd);
    if (g > 1) {
        nn /= g;
        dd /= g;
    }
    Fraction f;
    f.num = nn;
    f.den = dd;
    return f;
}

}  // namespace

Fraction::Fraction(std::int64_t n, std::int64_t d) { *this = make(n, d); }

Fraction Fraction::operator+(const Fraction& o) const {
    return make(static_cast<__int128>(num) * o.den + static_cast<__int128>(o.num) * den,
                static_cast<__int128>(den) * o.den);
}
Fraction Fraction::operator-(const Fraction& o) const {
    return make(static_cast<__int128>(num) * o.den - static_cast<__int128>(o.num) * den,
                static_cast<__int128>(den) * o.den);
}
Fraction Fraction::operator*(const Fraction& o) const {
    return make(static_cast<__int128>(num) * o.num, static_cast<__int128>(den) * o.den);
}
Fraction Fraction::operator/(const Fraction& o) const {
    if (o.num == 0) throw std::domain_error("Fraction: division by zero");
    return make(static_cast<__int128>(num) * o.den, static_cast<__int128>(den) * o.num);
}
bool Fraction::operator<(const Fraction& o) const {
    return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
}

std::string Fraction::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

}  // namespace tmhd
