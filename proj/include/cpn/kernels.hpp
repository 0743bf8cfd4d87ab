#pragma once

// Radial Green's-function kernels: the Bessel kernels G_{alpha,m0} of
// (-Laplace + m0^2)^alpha, the Yukawa kernel e^{-m0 r}/r, ball indicators
// and Gaussian-mollified versions, together with their self-convolutions
// Phi = G*G, L1 norms and decay bounds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/quadrature.hpp"
#include "cpn/special.hpp"

namespace cpn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown for invalid kernel or measure parameters.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class KernelVariant { bessel_alpha, yukawa, indicator_ball, uv_regularized };

inline std::string to_string(KernelVariant v) {
    switch (v) {
        case KernelVariant::bessel_alpha: return "bessel_alpha";
        case KernelVariant::yukawa: return "yukawa";
        case KernelVariant::indicator_ball: return "indicator_ball";
        case KernelVariant::uv_regularized: return "uv_regularized";
    }
    return "?";
}

inline KernelVariant kernel_variant_from_string(const std::string& s) {
    if (s == "bessel_alpha") return KernelVariant::bessel_alpha;
    if (s == "yukawa") return KernelVariant::yukawa;
    if (s == "indicator_ball") return KernelVariant::indicator_ball;
    if (s == "uv_regularized") return KernelVariant::uv_regularized;
    throw ParameterError("unknown kernel variant '" + s + "'");
}

struct KernelSpec {
    KernelVariant variant = KernelVariant::bessel_alpha;
    double alpha = 0.5;
    double m0 = 1.0;
    int dim = 2;
    double radius = 1.0;          ///< indicator_ball
    double epsilon = 0.0;         ///< mollifier width, uv_regularized
    KernelVariant base = KernelVariant::bessel_alpha;  ///< wrapped kernel, uv_regularized
    double truncation_radius = 0.0;  ///< 0 derives it from tail_tolerance
    double tail_tolerance = 1e-12;

    static KernelSpec bessel(double alpha, double m0, int dim) {
        KernelSpec s;
        s.variant = KernelVariant::bessel_alpha;
        s.alpha = alpha;
        s.m0 = m0;
        s.dim = dim;
        s.validate();
        return s;
    }
    static KernelSpec yukawa(double m0, int dim = 3) {
        KernelSpec s;
        s.variant = KernelVariant::yukawa;
        s.m0 = m0;
        s.dim = dim;
        s.validate();
        return s;
    }
    static KernelSpec indicator(double R, int dim) {
        KernelSpec s;
        s.variant = KernelVariant::indicator_ball;
        s.radius = R;
        s.dim = dim;
        s.validate();
        return s;
    }
    /// Gaussian mollification (standard deviation epsilon per axis) of a
    /// bessel_alpha or yukawa kernel.
    static KernelSpec uv_regularized(const KernelSpec& base, double epsilon) {
        KernelSpec s = base;
        s.variant = KernelVariant::uv_regularized;
        s.base = base.variant;
        s.epsilon = epsilon;
        s.validate();
        return s;
    }

    void validate() const {
        if (dim < 1) throw ParameterError("kernel dimension must be >= 1");
        if (tail_tolerance <= 0 || tail_tolerance >= 1) throw ParameterError("tail_tolerance outside (0,1)");
        if (truncation_radius < 0) throw ParameterError("truncation_radius must be >= 0");
        auto check_bessel = [&] {
            if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha outside (0,1]");
            if (!(m0 > 0.0)) throw ParameterError("m0 must be > 0");
        };
        auto check_yukawa = [&] {
            if (!(m0 > 0.0)) throw ParameterError("m0 must be > 0");
            if (dim < 2) throw ParameterError("yukawa kernel needs dim >= 2");
        };
        switch (variant) {
            case KernelVariant::bessel_alpha: check_bessel(); break;
            case KernelVariant::yukawa: check_yukawa(); break;
            case KernelVariant::indicator_ball:
                if (!(radius > 0.0)) throw ParameterError("indicator radius must be > 0");
                break;
            case KernelVariant::uv_regularized:
                if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
                if (base == KernelVariant::bessel_alpha)
                    check_bessel();
                else if (base == KernelVariant::yukawa)
                    check_yukawa();
                else
                    throw ParameterError("uv_regularized wraps bessel_alpha or yukawa only");
                break;
        }
    }

    bool operator==(const KernelSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Building blocks

/// The alpha = 1 kernel C_m(r) = (2 pi)^{-d/2} (m/r)^{d/2-1} K_{d/2-1}(m r).
inline double yukawa_bessel_profile(double m, double r, int d) {
    if (r <= 0.0) {
        if (d == 1) return 0.5 / m;
        return kInf;
    }
    const double x = m * r;
    if (x > 745.0) return 0.0;
    const double nu = 0.5 * d - 1.0;
    const double k = bessel_k_scaled(nu, x) * std::exp(-x);
    return std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::pow(m / r, nu) * k;
}

/// Value at the origin of G_{a,m} when it is finite (a > d/2).
inline double bessel_potential_at_zero(double a, double m, int d) {
    if (a <= 0.5 * d) return kInf;
    return std::pow(m, d - 2.0 * a) * std::tgamma(a - 0.5 * d) /
           (std::pow(4.0 * std::numbers::pi, 0.5 * d) * std::tgamma(a));
}

/// G_{a,m}(r) convolved with a centred Gaussian of variance 2 tau per axis,
/// from the proper-time integral (1/Gamma(a)) int t^{a-1} e^{-t m^2}
/// (4 pi (t+tau))^{-d/2} e^{-r^2/(4(t+tau))} dt. Valid for any order a > 0.
inline double heat_bessel_potential(double a, double m, int d, double tau, double r) {
    if (tau == 0.0 && r == 0.0) return bessel_potential_at_zero(a, m, d);
    const double m2 = m * m;
    auto L = [&](double u) {
        const double t = std::exp(u);
        const double s = t + tau;
        return a * u - m2 * t - 0.5 * d * std::log(4.0 * std::numbers::pi * s) - r * r / (4.0 * s);
    };
    double best = -kInf, ubest = 0.0;
    for (double u = -400.0; u <= 80.0; u += 1.0) {
        const double v = L(u);
        if (v > best) {
            best = v;
            ubest = u;
        }
    }
    constexpr double h = 0.125;
    double sum = 0.0;
    for (int dir : {1, -1}) {
        for (int k = (dir == 1 ? 0 : 1);; ++k) {
            const double v = L(ubest + dir * k * h);
            sum += std::exp(v - best);
            if (v < best - 42.0 && k > 8) break;
            if (k > 20000) break;
        }
    }
    return h * sum * std::exp(best - std::lgamma(a));
}

namespace detail {

/// Spectral quadrature of G_{alpha,m0}(r), 0 < alpha < 1: the mass integral
/// (sin(pi alpha)/pi) int_{m0^2}^inf C_m(r) (m^2-m0^2)^{-alpha} dm^2 after the
/// substitution m^2 = m0^2 + s^{1/(1-alpha)}.
inline double spectral_bessel(double alpha, double m0, int d, double r) {
    const double p = 1.0 / (1.0 - alpha);
    const double pref = std::sin(std::numbers::pi * alpha) / std::numbers::pi / (1.0 - alpha);
    const double m02 = m0 * m0;
    auto f = [&](double s) { return yukawa_bessel_profile(std::sqrt(m02 + std::pow(s, p)), r, d); };
    const double s1 = std::pow(m02, 1.0 / p);
    const double s2 = std::pow(1.0 / (r * r), 1.0 / p);
    const double sa = 1e-7 * std::min(s1, s2);
    const double mend = m0 + 44.0 / r;
    const double sb = std::pow(mend * mend - m02, 1.0 / p);
    std::vector<double> cuts{0.0, sa};
    const double ratio = std::sqrt(2.0);
    while (cuts.back() < sb) cuts.push_back(cuts.back() * ratio);
    return pref * panel_integrate(f, cuts, 20);
}

/// Order, prefactor and heat time describing a kernel as kappa * G_{a,m} mollified.
struct BesselFamily {
    double order;
    double kappa;
    double tau;
};

inline double yukawa_constant(int d) {
    const double a = 0.5 * (d - 1);
    return std::pow(2.0 * std::numbers::pi, 0.5 * d) * std::tgamma(a) /
           (std::pow(2.0, 1.0 - a) * std::sqrt(0.5 * std::numbers::pi));
}

inline BesselFamily family(const KernelSpec& s) {
    const KernelVariant v = s.variant == KernelVariant::uv_regularized ? s.base : s.variant;
    const double tau = s.variant == KernelVariant::uv_regularized ? 0.5 * s.epsilon * s.epsilon : 0.0;
    if (v == KernelVariant::yukawa) return {0.5 * (s.dim - 1), yukawa_constant(s.dim), tau};
    return {s.alpha, 1.0, tau};
}

/// G_{a,m} with optional mollification; closed form for a = 1, proper-time integral otherwise.
inline double bessel_potential(double a, double m, int d, double tau, double r) {
    if (tau == 0.0) {
        if (r == 0.0) return bessel_potential_at_zero(a, m, d);
        if (a == 1.0) return yukawa_bessel_profile(m, r, d);
    }
    return heat_bessel_potential(a, m, d, tau, r);
}

/// Volume of the intersection of two radius-R balls at centre distance r.
inline double ball_overlap_volume(double R, double r, int d) {
    if (r >= 2.0 * R) return 0.0;
    switch (d) {
        case 1: return 2.0 * R - r;
        case 2: return 2.0 * R * R * std::acos(r / (2.0 * R)) - 0.5 * r * std::sqrt(4.0 * R * R - r * r);
        case 3: return std::numbers::pi * (4.0 * R + r) * (2.0 * R - r) * (2.0 * R - r) / 12.0;
        default: break;
    }
    // general d: twice the volume of a hyperspherical cap of height R - r/2
    const double h = R - 0.5 * r;
    auto slice = [&](double x) { return unit_ball_volume(d - 1) * std::pow(std::max(0.0, R * R - x * x), 0.5 * (d - 1)); };
    return 2.0 * integrate_1d(slice, R - h, R, 1e-12).value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Kernel operations

inline double truncation_radius(const KernelSpec& s) {
    s.validate();
    if (s.truncation_radius > 0.0) return s.truncation_radius;
    if (s.variant == KernelVariant::indicator_ball) return s.radius;
    double r = 1.0 + std::log(1.0 / s.tail_tolerance) / s.m0;
    if (s.variant == KernelVariant::uv_regularized) r += 6.0 * s.epsilon;
    return r;
}

inline bool diverges_at_zero(const KernelSpec& s) {
    switch (s.variant) {
        case KernelVariant::bessel_alpha: return s.dim >= 2.0 * s.alpha;
        case KernelVariant::yukawa: return true;
        default: return false;
    }
}

/// True when Phi = G*G is infinite at the origin.
inline bool pair_diverges_at_zero(const KernelSpec& s) {
    switch (s.variant) {
        case KernelVariant::bessel_alpha: return 2.0 * s.alpha <= 0.5 * s.dim;
        case KernelVariant::yukawa: return s.dim <= 2;
        default: return false;
    }
}

/// Exponent p of the singularity G ~ r^{-p} at the origin (0: logarithmic, -1: bounded).
inline double singular_power(const KernelSpec& s) {
    if (!diverges_at_zero(s)) return -1.0;
    if (s.variant == KernelVariant::yukawa) return 1.0;
    return s.dim - 2.0 * s.alpha;
}

inline double pair_singular_power(const KernelSpec& s) {
    if (!pair_diverges_at_zero(s)) return -1.0;
    if (s.variant == KernelVariant::yukawa) return s.dim - 2.0 * (s.dim - 1);
    return s.dim - 4.0 * s.alpha;
}

/// Direct evaluation of G at distance r (no tabulation). Returns +infinity
/// at r = 0 for diverging kernels and 0 beyond the truncation radius.
inline double eval_kernel(const KernelSpec& s, double r) {
    s.validate();
    if (r < 0.0 || std::isnan(r)) throw ParameterError("radius must be >= 0");
    if (r > truncation_radius(s)) return 0.0;
    switch (s.variant) {
        case KernelVariant::indicator_ball: return r < s.radius ? 1.0 : 0.0;
        case KernelVariant::yukawa: return r == 0.0 ? kInf : std::exp(-s.m0 * r) / r;
        case KernelVariant::bessel_alpha: return detail::bessel_potential(s.alpha, s.m0, s.dim, 0.0, r);
        case KernelVariant::uv_regularized: {
            const auto f = detail::family(s);
            return f.kappa * heat_bessel_potential(f.order, s.m0, s.dim, f.tau, r);
        }
    }
    return 0.0;
}

/// Direct evaluation of Phi = G*G at distance r.
inline double pair_potential(const KernelSpec& s, double r) {
    s.validate();
    if (r < 0.0 || std::isnan(r)) throw ParameterError("radius must be >= 0");
    if (s.variant == KernelVariant::indicator_ball) return detail::ball_overlap_volume(s.radius, r, s.dim);
    if (r == 0.0 && pair_diverges_at_zero(s)) return kInf;
    if (r > 2.0 * truncation_radius(s)) return 0.0;
    const auto f = detail::family(s);
    return f.kappa * f.kappa * detail::bessel_potential(2.0 * f.order, s.m0, s.dim, 2.0 * f.tau, r);
}

/// Optimal constant c_alpha(d) of the bound G_{alpha,m0}(x) < c |x|^{-(d-2 alpha)},
/// computed as the massless spectral integral at unit distance. NaN when the
/// bound does not apply (d = 1, or alpha = 1 with d = 2).
inline double power_bound_constant(double alpha, int d) {
    if (d < 2 || !(alpha > 0.0 && alpha <= 1.0)) return std::numeric_limits<double>::quiet_NaN();
    if (alpha == 1.0) {
        if (d == 2) return std::numeric_limits<double>::quiet_NaN();
        return std::tgamma(0.5 * d - 1.0) / (4.0 * std::pow(std::numbers::pi, 0.5 * d));
    }
    const double pref = std::sin(std::numbers::pi * alpha) / std::numbers::pi;
    auto f = [&](double v) {
        const double m = std::exp(0.5 * v);
        return yukawa_bessel_profile(m, 1.0, d) * std::exp((1.0 - alpha) * v);
    };
    const double lo = -50.0 / (1.0 - alpha), hi = 2.0 * std::log(80.0);
    std::vector<double> cuts;
    for (double v = lo; v < hi; v += 1.0) cuts.push_back(v);
    cuts.push_back(hi);
    return pref * panel_integrate(f, cuts, 20);
}

/// L1 norm of the kernel: radial quadrature up to the truncation radius plus
/// the certified exponential tail bound.
inline double l1_norm(const KernelSpec& s) {
    if ((s.variant == KernelVariant::bessel_alpha || s.variant == KernelVariant::yukawa) && !(s.m0 > 0.0))
        throw ParameterError("massless kernel is not integrable");
    s.validate();
    const int d = s.dim;
    if (s.variant == KernelVariant::indicator_ball) return unit_ball_volume(d) * std::pow(s.radius, d);
    const double S = unit_sphere_area(d);
    const double rt = truncation_radius(s);
    const double scale = s.variant == KernelVariant::uv_regularized ? std::min(s.epsilon, 1.0 / s.m0) : 1.0 / s.m0;
    const double r_lo = 1e-13 * scale;
    auto g = [&](double u) {
        const double r = std::exp(u);
        return std::pow(r, d) * eval_kernel(s, r);
    };
    std::vector<double> cuts;
    const double u0 = std::log(r_lo), u1 = std::log(rt);
    const int n = static_cast<int>(std::ceil((u1 - u0) / 0.5));
    for (int i = 0; i <= n; ++i) cuts.push_back(u0 + (u1 - u0) * i / n);
    double body = S * panel_integrate(g, cuts, 16);
    // head below r_lo, using the local power law of G
    double head;
    if (diverges_at_zero(s)) {
        const double p = s.variant == KernelVariant::yukawa ? 1.0 : d - 2.0 * s.alpha;
        head = S * std::pow(r_lo, d) * eval_kernel(s, r_lo) / std::max(d - p, 1e-300);
    } else {
        head = S * std::pow(r_lo, d) * eval_kernel(s, r_lo) / d;
    }
    // tail beyond rt: G(r) <= G(1) e^{m0 (1 - r)}, integrated against S r^{d-1}
    double tail = 0.0;
    {
        const double C = eval_kernel(s, std::min(1.0, rt)) * std::exp(s.m0 * std::min(1.0, rt));
        const double x = s.m0 * rt;
        double sum = 0.0, term = 1.0, fact = 1.0;
        for (int k = 0; k < d; ++k) {
            if (k > 0) {
                term *= x;
                fact *= k;
            }
            sum += term / fact;
        }
        tail = S * C * std::tgamma(d) * std::exp(-x) * sum / std::pow(s.m0, d);
    }
    return body + head + tail;
}

// ---------------------------------------------------------------------------
// Tabulation for hot paths

/// Positive radial profile tabulated as y(u) = ln f(e^u) + mass e^u on a
/// uniform grid in u and interpolated by monotone cubic Hermite splines.
class RadialTable {
public:
    RadialTable() = default;

    /// `singular_power` p > 0 means f ~ r^{-p} at the origin, p = 0 a logarithmic
    /// singularity; pass a negative value for a bounded profile with f(0) = value_at_zero.
    RadialTable(const std::function<double(double)>& f, double r_min, double r_max, double mass,
                double singular_power, double value_at_zero, int per_decade = 64)
        : r_min_(r_min), r_max_(r_max), mass_(mass), diverging_(singular_power >= 0.0),
          power_(singular_power), f0_(value_at_zero) {
        const int n = std::max(8, static_cast<int>(std::ceil(std::log10(r_max / r_min) * per_decade)) + 1);
        u0_ = std::log(r_min);
        h_ = (std::log(r_max) - u0_) / (n - 1);
        y_.resize(n);
        for (int i = 0; i < n; ++i) {
            const double r = i + 1 == n ? r_max : std::exp(u0_ + i * h_);
            const double v = f(r);
            if (!(v > 0.0) || !std::isfinite(v)) throw std::runtime_error("RadialTable: profile must be positive and finite");
            y_[i] = std::log(v) + mass * r;
        }
        // fourth-order slopes in the interior, second order at the ends
        dy_.resize(n);
        for (int i = 0; i < n; ++i) {
            if (i >= 2 && i + 2 < n)
                dy_[i] = (-y_[i + 2] + 8.0 * y_[i + 1] - 8.0 * y_[i - 1] + y_[i - 2]) / (12.0 * h_);
            else if (i == 0)
                dy_[i] = (-3.0 * y_[0] + 4.0 * y_[1] - y_[2]) / (2.0 * h_);
            else if (i == n - 1)
                dy_[i] = (3.0 * y_[n - 1] - 4.0 * y_[n - 2] + y_[n - 3]) / (2.0 * h_);
            else
                dy_[i] = (y_[i + 1] - y_[i - 1]) / (2.0 * h_);
        }
        // Fritsch-Carlson limiter keeps the interpolant monotone where the data are
        for (int i = 0; i + 1 < n; ++i) {
            const double delta = (y_[i + 1] - y_[i]) / h_;
            if (delta == 0.0) {
                dy_[i] = dy_[i + 1] = 0.0;
                continue;
            }
            double a = dy_[i] / delta, b = dy_[i + 1] / delta;
            if (a < 0.0) dy_[i] = a = 0.0;
            if (b < 0.0) dy_[i + 1] = b = 0.0;
            const double t = a * a + b * b;
            if (t > 9.0) {
                const double tau = 3.0 / std::sqrt(t);
                dy_[i] = tau * a * delta;
                dy_[i + 1] = tau * b * delta;
            }
        }
        const double r1 = std::exp(u0_), r2 = std::exp(u0_ + h_);
        const double f1 = std::exp(y_[0] - mass * r1), f2 = std::exp(y_[1] - mass * r2);
        if (diverging_ && power_ == 0.0) {
            slope0_ = (f2 - f1) / h_;
        } else if (diverging_) {
            slope0_ = -power_;
        } else {
            const double a = f0_ - f1, b = f0_ - f2;
            slope0_ = (a > 0.0 && b > a) ? std::log(b / a) / h_ : 0.0;
        }
        f_rmin_ = f1;
    }

    [[nodiscard]] double operator()(double r) const {
        if (r > r_max_) return 0.0;
        if (r < r_min_) {
            if (r == 0.0) return f0_;
            if (diverging_ && power_ == 0.0) return f_rmin_ + slope0_ * std::log(r / r_min_);
            if (diverging_) return f_rmin_ * std::pow(r / r_min_, slope0_);
            if (slope0_ == 0.0) return f_rmin_;
            return f0_ - (f0_ - f_rmin_) * std::pow(r / r_min_, slope0_);
        }
        const double t = (std::log(r) - u0_) / h_;
        std::size_t i = static_cast<std::size_t>(t);
        if (i >= y_.size() - 1) i = y_.size() - 2;
        const double x = t - static_cast<double>(i);
        const double x2 = x * x, x3 = x2 * x;
        const double h00 = 2 * x3 - 3 * x2 + 1, h10 = x3 - 2 * x2 + x, h01 = -2 * x3 + 3 * x2, h11 = x3 - x2;
        const double y = h00 * y_[i] + h10 * h_ * dy_[i] + h01 * y_[i + 1] + h11 * h_ * dy_[i + 1];
        return std::exp(y - mass_ * r);
    }

    [[nodiscard]] double r_min() const { return r_min_; }
    [[nodiscard]] double r_max() const { return r_max_; }
    [[nodiscard]] std::size_t size() const { return y_.size(); }

private:
    double r_min_ = 0, r_max_ = 0, mass_ = 0;
    bool diverging_ = false;
    double power_ = -1;
    double f0_ = 0;
    double u0_ = 0, h_ = 1;
    double slope0_ = 0, f_rmin_ = 0;
    std::vector<double> y_, dy_;
};

/// Immutable kernel object for hot paths: closed forms where they exist,
/// otherwise a tabulated profile of eval_kernel.
class Kernel {
public:
    Kernel() = default;

    explicit Kernel(const KernelSpec& spec, int per_decade = 64)
        : spec_(spec), trunc_(truncation_radius(spec)), diverges_(diverges_at_zero(spec)) {
        spec.validate();
        if (spec.variant == KernelVariant::bessel_alpha || spec.variant == KernelVariant::uv_regularized) {
            const double scale = spec.variant == KernelVariant::uv_regularized
                                     ? std::min(spec.epsilon, 1.0 / spec.m0)
                                     : 1.0 / spec.m0;
            const double f0 = eval_kernel(spec, 0.0);
            table_ = RadialTable([&](double r) { return eval_kernel(spec, r); }, 1e-9 * scale, trunc_, spec.m0,
                                 singular_power(spec), f0, per_decade);
            tabulated_ = true;
        }
    }

    [[nodiscard]] double operator()(double r) const {
        if (r > trunc_) return 0.0;
        switch (spec_.variant) {
            case KernelVariant::indicator_ball: return r < spec_.radius ? 1.0 : 0.0;
            case KernelVariant::yukawa: return r == 0.0 ? kInf : std::exp(-spec_.m0 * r) / r;
            default: return table_(r);
        }
    }

    [[nodiscard]] const KernelSpec& spec() const { return spec_; }
    [[nodiscard]] int dim() const { return spec_.dim; }
    [[nodiscard]] double truncation() const { return trunc_; }
    [[nodiscard]] bool diverges() const { return diverges_; }
    [[nodiscard]] bool tabulated() const { return tabulated_; }

private:
    KernelSpec spec_;
    double trunc_ = 0.0;
    bool diverges_ = false;
    bool tabulated_ = false;
    RadialTable table_;
};

/// Tabulated Phi = G*G.
class PairPotential {
public:
    PairPotential() = default;

    explicit PairPotential(const KernelSpec& base, int per_decade = 64)
        : base_(base), diverges_(pair_diverges_at_zero(base)) {
        base.validate();
        reach_ = base.variant == KernelVariant::indicator_ball ? 2.0 * base.radius : 2.0 * truncation_radius(base);
        if (base.variant != KernelVariant::indicator_ball) {
            const double scale = base.variant == KernelVariant::uv_regularized
                                     ? std::min(base.epsilon, 1.0 / base.m0)
                                     : 1.0 / base.m0;
            // Phi decays like e^{-m0 r}; tabulate up to where it falls below the kernel tail tolerance
            const double rmax = std::min(reach_, 1.0 + std::log(1.0 / base.tail_tolerance) / base.m0 + 12.0 * base.epsilon);
            reach_ = rmax;
            table_ = RadialTable([&](double r) { return pair_potential(base, r); }, 1e-9 * scale, rmax, base.m0,
                                 pair_singular_power(base), pair_potential(base, 0.0), per_decade);
        }
    }

    [[nodiscard]] double operator()(double r) const {
        if (base_.variant == KernelVariant::indicator_ball)
            return detail::ball_overlap_volume(base_.radius, r, base_.dim);
        if (r > reach_) return 0.0;
        return table_(r);
    }

    [[nodiscard]] const KernelSpec& base() const { return base_; }
    [[nodiscard]] bool diverges_at_zero() const { return diverges_; }
    [[nodiscard]] double reach() const { return reach_; }

private:
    KernelSpec base_;
    bool diverges_ = false;
    double reach_ = 0.0;
    RadialTable table_;
};

// ---------------------------------------------------------------------------
// Bounds

struct DecayRow {
    double radius;
    double value;
    double exp_bound;    ///< C e^{-m0 r}, NaN for r <= 1
    bool exp_ok;
    double power_bound;  ///< c_alpha(d) r^{-(d-2 alpha)}, NaN when not applicable
    bool power_ok;
    double power_ratio;  ///< value / power_bound
};

struct DecayReport {
    bool applicable = true;
    std::string note;
    double C = 0.0;
    double c_alpha = 0.0;
    std::vector<DecayRow> rows;
    [[nodiscard]] bool all_pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const DecayRow& r) { return r.exp_ok && r.power_ok; });
    }
};

/// Checks G(r) <= C e^{-m0 r} for r > 1, with C = G(1) e^{m0}, and the power
/// bound G(r) < c_alpha(d) r^{-(d - 2 alpha)} where it applies.
inline DecayReport decay_bound_check(const KernelSpec& s, const std::vector<double>& radii) {
    DecayReport rep;
    if (s.variant == KernelVariant::indicator_ball) {
        rep.applicable = false;
        rep.note = "bound not applicable";
        return rep;
    }
    KernelSpec untrunc = s;
    untrunc.truncation_radius = 1e6;
    rep.C = eval_kernel(untrunc, 1.0) * std::exp(s.m0);
    double alpha_eff = std::numeric_limits<double>::quiet_NaN(), kappa = 1.0;
    if (s.variant == KernelVariant::bessel_alpha) alpha_eff = s.alpha;
    if (s.variant == KernelVariant::yukawa) {
        alpha_eff = 0.5 * (s.dim - 1);
        kappa = detail::yukawa_constant(s.dim);
    }
    rep.c_alpha = std::isnan(alpha_eff) ? alpha_eff : kappa * power_bound_constant(alpha_eff, s.dim);
    if (std::isnan(rep.c_alpha)) rep.note = "power bound not applicable";
    for (double r : radii) {
        if (!(r > 0.0)) throw ParameterError("decay_bound_check: radii must be > 0");
        DecayRow row{};
        row.radius = r;
        row.value = eval_kernel(untrunc, r);
        row.exp_bound = r > 1.0 ? rep.C * std::exp(-s.m0 * r) : std::numeric_limits<double>::quiet_NaN();
        row.exp_ok = r <= 1.0 || row.value <= row.exp_bound * (1.0 + 1e-9);
        if (!std::isnan(rep.c_alpha)) {
            row.power_bound = rep.c_alpha * std::pow(r, -(s.dim - 2.0 * alpha_eff));
            row.power_ratio = row.value / row.power_bound;
            row.power_ok = row.value < row.power_bound;
        } else {
            row.power_bound = row.power_ratio = std::numeric_limits<double>::quiet_NaN();
            row.power_ok = true;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

/// Two-column CSV (radius, value) of a kernel or pair profile.
inline void write_profile_csv(std::ostream& os, const std::vector<double>& radii,
                              const std::function<double(double)>& f, const std::string& column = "value") {
    os << "radius," << column << '\n';
    os.precision(17);
    for (double r : radii) os << r << ',' << f(r) << '\n';
}

}  // namespace cpn
