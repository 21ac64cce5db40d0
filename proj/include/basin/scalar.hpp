#ifndef BASIN_SCALAR_HPP
#define BASIN_SCALAR_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <gmpxx.h>

namespace basin {

/// Complex number over exact rationals. Division is exact; no rounding ever
/// occurs, so identities that hold formally hold bit-for-bit.
struct RatC {
    mpq_class re{0};
    mpq_class im{0};

    RatC() = default;
    RatC(long r) : re(r) {}
    RatC(long r, long i) : re(r), im(i) {}
    RatC(mpq_class r) : re(std::move(r)) {}
    RatC(mpq_class r, mpq_class i) : re(std::move(r)), im(std::move(i)) {}

    static RatC from_ratio(long p, long q) {
        RatC out;
        out.re = mpq_class(p, q);
        out.re.canonicalize();
        return out;
    }

    bool is_zero() const { return re == 0 && im == 0; }

    friend RatC operator+(const RatC& a, const RatC& b) { return {a.re + b.re, a.im + b.im}; }
    friend RatC operator-(const RatC& a, const RatC& b) { return {a.re - b.re, a.im - b.im}; }
    friend RatC operator-(const RatC& a) { return {-a.re, -a.im}; }
    friend RatC operator*(const RatC& a, const RatC& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend RatC operator/(const RatC& a, const RatC& b) {
        mpq_class n = b.re * b.re + b.im * b.im;
        if (n == 0) throw std::domain_error("RatC: division by zero");
        return {(a.re * b.re + a.im * b.im) / n, (a.im * b.re - a.re * b.im) / n};
    }
    RatC& operator+=(const RatC& o) { re += o.re; im += o.im; return *this; }
    RatC& operator-=(const RatC& o) { re -= o.re; im -= o.im; return *this; }
    RatC& operator*=(const RatC& o) { *this = *this * o; return *this; }
    friend bool operator==(const RatC& a, const RatC& b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(const RatC& a, const RatC& b) { return !(a == b); }
};

inline double to_double(const RatC& x) {
    // modulus, in double precision
    double r = x.re.get_d(), i = x.im.get_d();
    return std::hypot(r, i);
}

inline std::complex<double> to_complex(const RatC& x) { return {x.re.get_d(), x.im.get_d()}; }

inline std::string rational_to_string(const mpq_class& q) { return q.get_str(); }

inline mpq_class rational_from_string(const std::string& s) {
    mpq_class q;
    if (q.set_str(s, 10) != 0) throw std::invalid_argument("bad rational literal: " + s);
    q.canonicalize();
    return q;
}

/// Uniform interface over the two coefficient scalars: std::complex<double>
/// (float mode) and RatC (exact mode).
template <class S>
struct scalar_traits;

template <>
struct scalar_traits<std::complex<double>> {
    static constexpr bool is_exact = false;
    static std::complex<double> zero() { return {0.0, 0.0}; }
    static std::complex<double> one() { return {1.0, 0.0}; }
    static std::complex<double> from_int(long n) { return {double(n), 0.0}; }
    static std::complex<double> from_ratio(long p, long q) { return {double(p) / double(q), 0.0}; }
    static std::complex<double> from_double(double x) { return {x, 0.0}; }
    static bool is_zero(const std::complex<double>& x) { return x.real() == 0.0 && x.imag() == 0.0; }
    static double abs(const std::complex<double>& x) { return std::abs(x); }
    static std::complex<double> to_c(const std::complex<double>& x) { return x; }
};

template <>
struct scalar_traits<RatC> {
    static constexpr bool is_exact = true;
    static RatC zero() { return RatC(); }
    static RatC one() { return RatC(1); }
    static RatC from_int(long n) { return RatC(n); }
    static RatC from_ratio(long p, long q) { return RatC::from_ratio(p, q); }
    static RatC from_double(double x) {
        RatC out;
        out.re = mpq_class(x);
        out.re.canonicalize();
        return out;
    }
    static bool is_zero(const RatC& x) { return x.is_zero(); }
    static double abs(const RatC& x) { return to_double(x); }
    static std::complex<double> to_c(const RatC& x) { return to_complex(x); }
};

template <class S>
S scalar_pow(const S& base, long e) {
    S acc = scalar_traits<S>::one();
    if (e >= 0) {
        for (long i = 0; i < e; ++i) acc *= base;
        return acc;
    }
    for (long i = 0; i < -e; ++i) acc *= base;
    return scalar_traits<S>::one() / acc;
}

}  // namespace basin

#endif
