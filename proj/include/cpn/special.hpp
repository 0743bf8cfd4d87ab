#pragma once

// Modified Bessel functions of the second kind for the orders that occur in
// radial Green's functions: integer orders and half-integer orders.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace cpn {

namespace detail {

/// Power series for K0 and K1, accurate for 0 < x <= 2.
inline std::pair<double, double> bessel_k01_series(double x) {
    const double q = 0.25 * x * x;
    const double lg = std::log(0.5 * x);
    constexpr double euler = std::numbers::egamma;
    // K0 = -ln(x/2) I0 + sum psi(k+1) q^k/(k!)^2
    // K1 = 1/x + ln(x/2) I1 - (x/4) sum [psi(k+1)+psi(k+2)] q^k/(k!(k+1)!)
    double t0 = 1.0;          // q^k/(k!)^2
    double t1 = 1.0;          // q^k/(k!(k+1)!)
    double psi1 = -euler;     // psi(k+1)
    double i0 = 0.0, i1 = 0.0, s0 = 0.0, s1 = 0.0;
    for (int k = 0; k < 60; ++k) {
        const double psi2 = psi1 + 1.0 / (k + 1);
        i0 += t0;
        i1 += t1;
        s0 += psi1 * t0;
        s1 += (psi1 + psi2) * t1;
        if (t0 < 1e-18 * std::abs(i0) && k > 2) break;
        t0 *= q / ((k + 1.0) * (k + 1.0));
        t1 *= q / ((k + 1.0) * (k + 2.0));
        psi1 = psi2;
    }
    i1 *= 0.5 * x;
    const double k0 = -lg * i0 + s0;
    const double k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    return {k0, k1};
}

/// Steed's continued fraction for e^x K0(x) and e^x K1(x), x > 2.
inline std::pair<double, double> bessel_k01_scaled_cf(double x) {
    constexpr double eps = 1e-16;
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25;
    double q = a1, c = a1, a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 1; i < 10000; ++i) {
        a -= 2 * i;
        c = -a * c / (i + 1.0);
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < eps) break;
    }
    h = a1 * h;
    const double k0 = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
    const double k1 = k0 * (x + 0.5 - h) / x;
    return {k0, k1};
}

}  // namespace detail

/// Returns (K0(x), K1(x)) for x > 0.
inline std::pair<double, double> bessel_k01(double x) {
    if (!(x > 0.0)) throw std::domain_error("bessel_k01: argument must be positive");
    if (x <= 2.0) return detail::bessel_k01_series(x);
    auto [k0, k1] = detail::bessel_k01_scaled_cf(x);
    const double e = std::exp(-x);
    return {k0 * e, k1 * e};
}

/// e^x K_n(x) for integer n >= 0, by upward recurrence.
inline double bessel_k_int_scaled(int n, double x) {
    double k0, k1;
    if (x <= 2.0) {
        std::tie(k0, k1) = detail::bessel_k01_series(x);
        const double e = std::exp(x);
        k0 *= e;
        k1 *= e;
    } else {
        std::tie(k0, k1) = detail::bessel_k01_scaled_cf(x);
    }
    if (n == 0) return k0;
    for (int k = 1; k < n; ++k) {
        const double k2 = k0 + 2.0 * k / x * k1;
        k0 = k1;
        k1 = k2;
    }
    return k1;
}

/// e^x K_{n+1/2}(x) for integer n >= 0.
inline double bessel_k_half_scaled(int n, double x) {
    double km = std::sqrt(std::numbers::pi / (2.0 * x));  // order 1/2
    if (n == 0) return km;
    double k = km * (1.0 + 1.0 / x);                      // order 3/2
    for (int j = 1; j < n; ++j) {
        const double nu = j + 0.5;
        const double kn = km + 2.0 * nu / x * k;
        km = k;
        k = kn;
    }
    return k;
}

/// e^x K_nu(x) for nu an integer or half-integer (sign ignored).
inline double bessel_k_scaled(double nu, double x) {
    nu = std::abs(nu);
    const double twice = 2.0 * nu;
    const int n2 = static_cast<int>(std::lround(twice));
    if (std::abs(twice - n2) > 1e-12)
        throw std::domain_error("bessel_k_scaled: order must be integer or half-integer");
    if (n2 % 2 == 0) return bessel_k_int_scaled(n2 / 2, x);
    return bessel_k_half_scaled((n2 - 1) / 2, x);
}

inline double bessel_k(double nu, double x) {
    if (x > 700.0) return 0.0;
    return bessel_k_scaled(nu, x) * std::exp(-x);
}

/// Surface area of the unit sphere S^{d-1} in R^d.
inline double unit_sphere_area(int d) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) {
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

}  // namespace cpn
