#pragma once

// Continuum scaling: rescaled Levy exponents, the Gaussian limit, the scaling
// identity, L^2 triviality of unrenormalised trigonometric interactions, the
// characteristic/correlation duality and sine-Gordon weights.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/ensembles.hpp"
#include "cpn/gcmc.hpp"
#include "cpn/kernels.hpp"
#include "cpn/potentials.hpp"
#include "cpn/quadrature.hpp"
#include "cpn/series.hpp"
#include "cpn/stats.hpp"

namespace cpn {

/// psi_z(t) = z int (e^{i s t / sqrt z} - 1) dr(s).
inline cplx psi_scaled(const ChargeDistribution& r, double z, double t) {
    if (!(z > 0.0)) throw ParameterError("scaled exponent needs z > 0");
    const double k = 1.0 / std::sqrt(z);
    cplx s{};
    for (const auto& a : r.atoms()) s += a.w * expim1(a.s * t * k);
    return z * s;
}

struct ScalingSchedule {
    std::vector<double> z{1.0, 10.0, 100.0, 1000.0};
    ChargeDistribution r = ChargeDistribution::rademacher();
    std::vector<double> t;

    /// Limit variance int s^2 dr.
    [[nodiscard]] double sigma_sq() const { return r.second_moment(); }

    void validate() const {
        for (std::size_t i = 1; i < z.size(); ++i)
            if (!(z[i] > z[i - 1])) throw ParameterError("schedule z values must increase");
        if (!(sigma_sq() > 0.0)) throw ParameterError("schedule needs a nondegenerate charge law");
    }

    /// 20 points evenly spaced in (0, t_max].
    static std::vector<double> t_grid(double t_max = 2.0, int n = 20) {
        std::vector<double> t(n);
        for (int i = 0; i < n; ++i) t[i] = t_max * (i + 1) / n;
        return t;
    }
};

struct PsiLimitRow {
    double z;
    double max_error;  ///< sup_t |psi_z(t) + sigma^2 t^2 / 2|
};

inline std::vector<PsiLimitRow> psi_limit_table(const ScalingSchedule& s) {
    s.validate();
    const auto t = s.t.empty() ? ScalingSchedule::t_grid() : s.t;
    std::vector<PsiLimitRow> rows;
    for (double z : s.z) {
        double e = 0.0;
        for (double x : t) e = std::max(e, std::abs(psi_scaled(s.r, z, x) + 0.5 * s.sigma_sq() * x * x));
        rows.push_back({z, e});
    }
    return rows;
}

struct GaussianLimitRow {
    double z;
    cplx cpn;
    double gaussian;
    double gap;
};

struct GaussianLimitReport {
    std::vector<GaussianLimitRow> rows;
    double sigma_sq = 0.0;
    double sigma_sq_alt = 0.0;  ///< 2 int s^2 dr, the alternative normalisation, reported for comparison
    int inversions = 0;
    [[nodiscard]] bool monotone(int allowed = 1) const { return inversions <= allowed; }
};

/// int (sum_j alpha_j G(x - y_j))^2 dx = sum_{jk} alpha_j alpha_k Phi(y_j - y_k); infinite when Phi diverges.
inline double probe_energy(const MarkedConfiguration& probe, const PairPotential& phi) {
    double e = 0.0;
    for (const auto& a : probe.particles())
        for (const auto& b : probe.particles()) {
            const double v = phi(distance(a.x, b.x, probe.dim()));
            if (std::isinf(v)) {
                if (a.s * b.s != 0.0) return kInf;
                continue;
            }
            e += a.s * b.s * v;
        }
    return e;
}

inline GaussianLimitReport gaussian_limit_report(const ScalingSchedule& s, const Kernel& kernel,
                                                 const MarkedConfiguration& probe, const QuadSettings& qs = {}) {
    s.validate();
    GaussianLimitReport rep;
    rep.sigma_sq = s.sigma_sq();
    rep.sigma_sq_alt = 2.0 * s.sigma_sq();
    const PairPotential phi(kernel.spec());
    const double e = probe.empty() ? 0.0 : probe_energy(probe, phi);
    const double gauss = std::isinf(e) ? 0.0 : std::exp(-0.5 * rep.sigma_sq * e);
    for (double z : s.z) {
        cplx cpn{1.0, 0.0};
        if (!probe.empty()) {
            auto res = log_functional_free(kernel, probe, [&](double t) { return psi_scaled(s.r, z, t); }, qs, 2.0 * z);
            if (!res.converged) throw ToleranceError("gaussian_limit_report: quadrature did not converge", res.error);
            cpn = std::exp(res.value);
        }
        rep.rows.push_back({z, cpn, gauss, std::abs(cpn - gauss)});
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (rep.rows[i].gap > rep.rows[i - 1].gap) ++rep.inversions;
    return rep;
}

struct ScalingIdentityReport {
    cplx lhs, rhs;
    double rel_error = 0.0;
};

/// int psi(lambda^{-d/2} f(x/lambda)) dx against int psi_{lambda^d}(f(x)) dx
/// with psi the exponent at unit activity.
inline ScalingIdentityReport scaling_identity_check(const ChargeDistribution& r, double lambda, const TestProfile& f,
                                                    QuadSettings qs = {}) {
    if (!(lambda > 0.0)) throw ParameterError("lambda must be > 0");
    qs.rel_tol = std::min(qs.rel_tol, 1e-13);
    qs.abs_tol = std::min(qs.abs_tol, 1e-15);
    const int d = f.dim;
    const double z = std::pow(lambda, d), amp = std::pow(lambda, -0.5 * d);
    Region big = f.support;
    for (int i = 0; i < d; ++i) {
        big.lo[i] *= lambda;
        big.hi[i] *= lambda;
    }
    auto left = [&](const Point& x) {
        Point u = x;
        for (int i = 0; i < d; ++i) u[i] /= lambda;
        return levy_psi(r, 1.0, amp * f(u));
    };
    auto right = [&](const Point& x) { return psi_scaled(r, z, f(x)); };
    ScalingIdentityReport rep;
    rep.lhs = integrate_box<cplx>(left, big, qs).value;
    rep.rhs = integrate_box<cplx>(right, f.support, qs).value;
    rep.rel_error = std::abs(rep.lhs - rep.rhs) / std::max(std::abs(rep.rhs), 1e-300);
    return rep;
}

// ---------------------------------------------------------------------------
// L^2 norm of V = int_Lambda int cos(alpha X^z(x)) dnu(alpha) dx under the scaled free noise.

struct TrivialityResult {
    double value = 0.0;
    double error = 0.0;
    bool flagged = false;
};

namespace detail {

/// Measure of {(x, x') in box^2 : |x - x'| = D} per unit D (d = 1, 2).
inline double pair_distance_density(const Region& box, double D) {
    if (box.dim == 1) return D < box.length(0) ? 2.0 * (box.length(0) - D) : 0.0;
    const double L1 = box.length(0), L2 = box.length(1);
    if (D <= std::min(L1, L2)) return D * (2.0 * std::numbers::pi * L1 * L2 - 4.0 * D * (L1 + L2) + 2.0 * D * D);
    // 4 D int_0^{pi/2} (L1 - D cos)_+ (L2 - D sin)_+ dtheta
    const double a = D > L1 ? std::acos(L1 / D) : 0.0;          // cos < L1/D beyond a
    const double b = D > L2 ? std::asin(L2 / D) : std::numbers::pi / 2;  // sin < L2/D before b
    if (a >= b) return 0.0;
    auto g = [&](double th) { return (L1 - D * std::cos(th)) * (L2 - D * std::sin(th)); };
    return 4.0 * D * integrate_1d(g, a, b, 1e-12).value;
}

/// int psi(a G(x) + b G(x - D e_1)) dx for real psi. In d = 2 the plane is
/// mapped to elliptic coordinates with foci at the two centres, which resolves
/// both singular points and the radial decay at every separation D.
template <class Psi>
IntegrationResult<double> two_center_exponent(const Kernel& kernel, Psi&& psi, double a, double b, double D,
                                              const QuadSettings& qs) {
    const double R = kernel.truncation();
    if (kernel.dim() == 1) {
        auto f = [&](double x) {
            const double t = a * kernel(std::abs(x)) + b * kernel(std::abs(x - D));
            return std::isfinite(t) ? psi(t) : 0.0;
        };
        // R and D - R are where a compactly supported kernel switches off
        std::vector<double> cuts{-R, 0.0, D, D + R, R, D - R};
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        IntegrationResult<double> out;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lo = cuts[i], hi = cuts[i + 1];
            auto part = integrate_1d(f, lo, hi, qs.rel_tol);
            out.value += part.value;
            out.error += part.error;
            out.evals += part.evals;
            out.converged = out.converged && part.converged;
        }
        return out;
    }
    if (kernel.dim() != 2) throw ParameterError("two-centre exponent supports d <= 2");
    const double h = 0.5 * D;
    const double mu_max = std::asinh((R + D) / h);
    auto f = [&](const Point& p) {
        const double mu = p[0], nu = p[1];
        const double ch = std::cosh(mu), c = std::cos(nu), sh = std::sinh(mu), sn = std::sin(nu);
        const double r1 = h * (ch - c), r2 = h * (ch + c);
        const double t = a * kernel(r1) + b * kernel(r2);
        if (!std::isfinite(t)) return 0.0;
        return 2.0 * h * h * (sh * sh + sn * sn) * psi(t);
    };
    Region box = Region::box(2, 0.0, 1.0);
    box.hi[0] = mu_max;
    box.hi[1] = std::numbers::pi;
    QuadSettings q = qs;
    q.initial_cell = std::numbers::pi / 8.0;
    return integrate_box<double>(f, box, q);
}

/// Radial outer integration over pair distances in (0, Dmax].
template <class H>
TrivialityResult radial_pair_integral(const Region& box, H&& h) {
    if (box.dim > 2) throw ParameterError("triviality integrals support d <= 2");
    double dmax = 0.0;
    for (int i = 0; i < box.dim; ++i) dmax += box.length(i) * box.length(i);
    dmax = std::sqrt(dmax);
    std::vector<double> cuts{0.0};
    for (int k = 8; k >= 1; --k) cuts.push_back(dmax * std::pow(10.0, -k));
    const int fine = 6;
    for (int k = 1; k <= fine; ++k) cuts.push_back(dmax * std::pow(10.0, -1.0 + k / double(fine)));
    if (box.dim == 2) {
        for (double c : {box.length(0), box.length(1)}) cuts.push_back(c);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
    TrivialityResult out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double err = 0.0;
        auto f = [&](double D) {
            double e = 0.0;
            const double v = h(D, e);
            const double w = pair_distance_density(box, D);
            err += w * e;
            return w * v;
        };
        out.value += gauss_integrate(f, cuts[i], cuts[i + 1], 8);
        out.error += err * (cuts[i + 1] - cuts[i]) / 8.0;
    }
    return out;
}

}  // namespace detail

/// E|V_Lambda^z|^2 for a real symmetric finite nu and symmetric r:
/// int int sum_{a,b} nu_a nu_b exp(int psi_z(a G(x) + b G(x - D)) dx) over pairs at distance D.
inline TrivialityResult triviality_l2(double z, const InteractionMeasure& nu, const ChargeDistribution& r,
                                      const Kernel& kernel, const Region& region, const QuadSettings& qs = {}) {
    if (!r.symmetric()) throw ParameterError("triviality needs a symmetric charge law");
    for (const auto& a : nu.atoms())
        if (a.w.imag() != 0.0) throw ParameterError("triviality needs a real interaction measure");
    auto J = [&](double a, double b, double D) {
        return detail::two_center_exponent(kernel, [&](double t) { return psi_scaled(r, z, t).real(); }, a, b, D, qs);
    };
    bool flagged = false;
    auto h = [&](double D, double& err) {
        std::map<std::pair<double, double>, double> cache;
        double v = 0.0;
        for (const auto& A : nu.atoms())
            for (const auto& B : nu.atoms()) {
                // symmetric r: (a, b), (-a, -b) and (b, a) share the exponent
                double a = A.alpha, b = B.alpha;
                if (a < 0.0 || (a == 0.0 && b < 0.0)) {
                    a = -a;
                    b = -b;
                }
                if (std::abs(b) > a || (std::abs(b) == a && b > a)) {
                    std::swap(a, b);
                    if (a < 0.0) {
                        a = -a;
                        b = -b;
                    }
                }
                auto key = std::make_pair(a, b);
                auto it = cache.find(key);
                if (it == cache.end()) {
                    auto res = J(a, b, D);
                    if (!res.converged && res.error > 10.0 * qs.abs_tol) flagged = true;
                    const double ex = std::exp(res.value);
                    err += ex * res.error * std::abs(A.w.real() * B.w.real());
                    it = cache.emplace(key, ex).first;
                }
                v += A.w.real() * B.w.real() * it->second;
            }
        return v;
    };
    TrivialityResult out = detail::radial_pair_integral(region, h);
    out.flagged = flagged;
    return out;
}

/// z -> infinity limit for a square-integrable kernel: exponents -sigma^2/2 (a^2 + b^2) Phi(0) - sigma^2 a b Phi(D).
inline TrivialityResult triviality_plateau(const InteractionMeasure& nu, const ChargeDistribution& r,
                                           const KernelSpec& kernel, const Region& region) {
    const PairPotential phi(kernel);
    const double s2 = r.second_moment();
    const double phi0 = phi(0.0);
    if (!std::isfinite(phi0)) return {};
    auto h = [&](double D, double&) {
        const double pd = phi(D);
        double v = 0.0;
        for (const auto& A : nu.atoms())
            for (const auto& B : nu.atoms())
                v += A.w.real() * B.w.real() *
                     std::exp(-0.5 * s2 * (A.alpha * A.alpha + B.alpha * B.alpha) * phi0 - s2 * A.alpha * B.alpha * pd);
        return v;
    };
    return detail::radial_pair_integral(region, h);
}

// ---------------------------------------------------------------------------
// Duality: the characteristic functional of the interacting field with
// (z, beta, r, nu) equals the correlation functional of the particle system
// with activity beta, inverse temperature z, charges nu and interaction r.

struct DualityPairing {
    double z = 0.1, beta = 0.1;
    ChargeDistribution r = ChargeDistribution::rademacher();
    InteractionMeasure nu = InteractionMeasure::rademacher();
    KernelSpec kernel = KernelSpec::indicator(0.1, 1);
    Region region = Region::box(1, 0.0, 1.0);

    /// Exchanges z <-> beta and r <-> nu (nu must be a probability measure, r symmetric).
    [[nodiscard]] DualityPairing swapped() const {
        DualityPairing d = *this;
        d.z = beta;
        d.beta = z;
        d.r = nu.as_charges();
        d.nu = as_interaction(r);
        return d;
    }

    bool operator==(const DualityPairing&) const = default;
};

struct DualityReport {
    EstimatorResult lhs;  ///< characteristic functional
    RhoEstimate rhs;      ///< dual correlation functional
    double z_score = 0.0;
    std::vector<std::string> warnings;
    [[nodiscard]] bool reliable() const { return warnings.empty(); }
};

/// Sampler settings of `base` (seed, sweeps, grid) with the pairing's physics.
inline GcmcParams forward_params(const DualityPairing& p, GcmcParams base) {
    base.z = p.z;
    base.beta = p.beta;
    base.region = p.region;
    base.kernel = p.kernel;
    base.charges = p.r;
    base.density = EnergyDensity::trigonometric(p.nu);
    base.domain = EnergyDomain::cutoff;
    return base;
}

inline GcmcParams dual_params(const DualityPairing& p, GcmcParams base) {
    const DualityPairing d = p.swapped();
    base.z = d.z;
    base.beta = d.beta;
    base.region = d.region;
    base.kernel = d.kernel;
    base.charges = d.r;
    base.density = EnergyDensity::trigonometric(d.nu);
    base.domain = EnergyDomain::whole_space;
    return base;
}

inline DualityReport duality_check(const MarkedConfiguration& eta, const DualityPairing& pairing,
                                   const GcmcParams& sampler, std::size_t n_samples) {
    DualityReport rep;
    GcmcParams fwd = forward_params(pairing, sampler);
    GcmcParams dual = dual_params(pairing, sampler);
    dual.seed = sampler.seed + 1;
    rep.lhs = estimate_char_functional(eta, fwd, n_samples);
    rep.rhs = estimate_rho(eta, dual, n_samples);
    rep.z_score = z_score(rep.lhs.mean, rep.lhs.stderr(), rep.rhs.result.mean, rep.rhs.result.stderr());
    for (const auto& w : rep.lhs.warnings) rep.warnings.push_back("characteristic functional: " + w);
    for (const auto& w : rep.rhs.result.warnings) rep.warnings.push_back("correlation functional: " + w);
    return rep;
}

struct DualityClosedForm {
    cplx lhs;
    double rhs;
    double rel_error;
};

/// beta = 0: both sides reduce to exp(int psi(X_eta)) = exp(-z U_r(eta)).
inline DualityClosedForm duality_closed_form(const MarkedConfiguration& eta, const DualityPairing& p,
                                             const QuadSettings& qs = {}) {
    const Kernel k(p.kernel);
    DualityClosedForm c;
    c.lhs = char_functional_free(k, p.r, p.z, eta, qs);
    const auto U = potential_U(eta, k, EnergyDensity::trigonometric(as_interaction(p.r)), qs, nullptr);
    c.rhs = std::exp(-p.z * U.value);
    c.rel_error = std::abs(c.lhs - c.rhs) / std::max(c.rhs, 1e-300);
    return c;
}

// ---------------------------------------------------------------------------
// Sine-Gordon weights in d = 2 with G = G_{1/2, m0} and G1 = G * G.

struct GaussianBump {
    Point c{0.0, 0.0, 0.0};
    double width = 0.25;
    double height = 1.0;
};

struct SineGordonSetup {
    double m0 = 1.0;
    ChargeDistribution r = ChargeDistribution::rademacher();
    InteractionMeasure nu = InteractionMeasure::rademacher();
    Region region = Region::box(2, 0.0, 1.0);
    std::vector<GaussianBump> f;
    double zeta = 1.0;
    double tail_tolerance = 1e-12;

    [[nodiscard]] KernelSpec kernel() const {
        KernelSpec k = KernelSpec::bessel(0.5, m0, 2);
        k.tail_tolerance = tail_tolerance;
        return k;
    }
    [[nodiscard]] KernelSpec pair_kernel() const {
        KernelSpec k = KernelSpec::bessel(1.0, m0, 2);
        k.tail_tolerance = tail_tolerance;
        return k;
    }
    [[nodiscard]] double sigma_sq() const { return r.second_moment(); }

    void validate() const {
        if (!(m0 > 0.0)) throw ParameterError("m0 must be > 0");
        if (region.dim != 2) throw ParameterError("sine-Gordon setup is two-dimensional");
        if (!nu.is_probability()) throw ParameterError("nu must be a probability measure");
        for (const auto& a : nu.atoms()) {
            double partner = 0.0;
            for (const auto& b : nu.atoms())
                if (b.alpha == -a.alpha) partner += b.w.real();
            if (std::abs(partner - a.w.real()) > 1e-12) throw ParameterError("nu must be symmetric");
        }
        for (const auto& b : f)
            if (!(b.width > 0.0)) throw ParameterError("bump width must be > 0");
    }
};

enum class SgWhich { scaled, gaussian };

/// Precomputed kernels and source profiles for one setup.
class SineGordon {
public:
    explicit SineGordon(const SineGordonSetup& s) : s_(s), G_(s.kernel()), G1_(s.pair_kernel()) {
        s.validate();
        for (const auto& b : s.f) {
            const double tau = 0.5 * b.width * b.width;
            const double amp = b.height * 2.0 * std::numbers::pi * b.width * b.width;
            const double r_max = G_.truncation() + 9.0 * b.width;
            auto prof = [&](double r) { return heat_bessel_potential(0.5, s.m0, 2, tau, r); };
            bumps_.push_back({b, amp, RadialTable(prof, 1e-6 * b.width, r_max, s.m0, -1.0, prof(0.0), 64)});
        }
    }

    [[nodiscard]] const SineGordonSetup& setup() const { return s_; }
    [[nodiscard]] const Kernel& kernel() const { return G_; }

    /// (G * f)(x).
    [[nodiscard]] double source(const Point& x) const {
        double v = 0.0;
        for (const auto& b : bumps_) v += b.amp * b.table(distance(x, b.bump.c, 2));
        return v;
    }
    /// (G1 * f)(y).
    [[nodiscard]] double source1(const Point& y) const {
        double v = 0.0;
        for (const auto& b : bumps_)
            v += b.amp * heat_bessel_potential(1.0, s_.m0, 2, 0.5 * b.bump.width * b.bump.width, distance(y, b.bump.c, 2));
        return v;
    }
    /// (f * G1 * f)(0) = int (G * f)^2 dx.
    [[nodiscard]] double source_energy() const {
        double v = 0.0;
        for (const auto& a : bumps_)
            for (const auto& b : bumps_) {
                const double tau = 0.5 * (a.bump.width * a.bump.width + b.bump.width * b.bump.width);
                v += a.amp * b.amp * heat_bessel_potential(1.0, s_.m0, 2, tau, distance(a.bump.c, b.bump.c, 2));
            }
        return v;
    }

    [[nodiscard]] double gaussian(const MarkedConfiguration& c) const {
        double v = bumps_.empty() ? 0.0 : source_energy();
        for (const auto& p : c.particles()) v += 2.0 * p.s * source1(p.x);
        for (std::size_t j = 0; j < c.size(); ++j)
            for (std::size_t l = 0; l < c.size(); ++l) {
                if (j == l) continue;
                const double r = distance(c[j].x, c[l].x, 2);
                if (r == 0.0) throw SingularConfiguration("coincident positions");
                v += c[j].s * c[l].s * G1_(r);
            }
        return 0.5 * s_.sigma_sq() * v;
    }

    [[nodiscard]] double scaled(double z, const MarkedConfiguration& c, const QuadSettings& qs = {}) const {
        if (bumps_.empty() && c.size() <= 1) return 0.0;
        const auto& r = s_.r;
        auto integrand = [&](const Point& x) {
            double total = source(x);
            double self = 0.0;
            for (const auto& p : c.particles()) {
                const double g = p.s * G_(distance(x, p.x, 2));
                if (!std::isfinite(g)) return 0.0;
                total += g;
                self += psi_scaled(r, z, g).real();
            }
            return -psi_scaled(r, z, total).real() + self;
        };
        Region box = Region::box(2, 0.0, 1.0);
        bool first = true;
        auto grow = [&](const Point& p, double margin) {
            for (int i = 0; i < 2; ++i) {
                box.lo[i] = first ? p[i] - margin : std::min(box.lo[i], p[i] - margin);
                box.hi[i] = first ? p[i] + margin : std::max(box.hi[i], p[i] + margin);
            }
            first = false;
        };
        const double rt = G_.truncation();
        for (const auto& b : bumps_) grow(b.bump.c, rt + 9.0 * b.bump.width);
        for (const auto& p : c.particles()) grow(p.x, rt);
        auto res = integrate_with_cores<double>(integrand, box, positions(c), qs, 4.0 * z * (c.size() + 1.0));
        if (!res.converged) throw ToleranceError("sine-Gordon potential: quadrature did not converge", res.error);
        return res.value;
    }

    [[nodiscard]] double potential(SgWhich which, double z, const MarkedConfiguration& c,
                                   const QuadSettings& qs = {}) const {
        return which == SgWhich::gaussian ? gaussian(c) : scaled(z, c, qs);
    }

    /// Coefficient of zeta^l beta^n in the numerator expansion:
    /// (-1)^{l+n}/(l! n!) int_{Lambda^n} int [U(f; y, alpha)]^l dy dnu^n.
    [[nodiscard]] QmcResult<double> series_coefficient(int n, int l, SgWhich which, double z, std::size_t points,
                                                       int replicates, std::uint64_t seed,
                                                       const QuadSettings& qs = {}) const {
        if (n < 0 || n > 3 || l < 0 || l > 2) throw ParameterError("series coefficient needs n <= 3 and l <= 2");
        const double pref = ((l + n) % 2 ? -1.0 : 1.0) / (std::tgamma(l + 1.0) * std::tgamma(n + 1.0));
        const auto& atoms = s_.nu.atoms();
        const double vol = s_.region.volume();
        std::size_t tuples = 1;
        for (int k = 0; k < n; ++k) tuples *= atoms.size();
        auto f = [&](const std::vector<double>& u) {
            double total = 0.0;
            for (std::size_t t = 0; t < tuples; ++t) {
                std::size_t rem = t;
                double w = 1.0;
                MarkedConfiguration c(2);
                for (int k = 0; k < n; ++k) {
                    const auto& a = atoms[rem % atoms.size()];
                    rem /= atoms.size();
                    w *= a.w.real();
                    Point y{0.0, 0.0, 0.0};
                    for (int i = 0; i < 2; ++i) y[i] = s_.region.lo[i] + u[2 * k + i] * s_.region.length(i);
                    c.add({y, a.alpha});
                }
                const double U = l == 0 ? 1.0 : potential(which, z, c, qs);
                total += w * std::pow(U, l);
            }
            return total * std::pow(vol, n);
        };
        RngStream rng(seed, 0, 7);
        auto r = qmc_integrate<double>(2 * n, points, replicates, f, [&] { return rng.uniform(); });
        r.mean *= pref;
        r.stderr *= std::abs(pref);
        return r;
    }

private:
    struct Bump {
        GaussianBump bump;
        double amp;
        RadialTable table;
    };
    SineGordonSetup s_;
    Kernel G_;
    Kernel G1_;
    std::vector<Bump> bumps_;
};

inline double sg_potential(const SineGordonSetup& s, SgWhich which, double z, const MarkedConfiguration& c,
                           const QuadSettings& qs = {}) {
    return SineGordon(s).potential(which, z, c, qs);
}

}  // namespace cpn
