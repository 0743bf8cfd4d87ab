#pragma once

// Charge distributions, interaction measures, free Poisson sampling and the
// exactly computable functionals of the free convoluted Poisson noise.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/fields.hpp"
#include "cpn/geometry.hpp"
#include "cpn/kernels.hpp"
#include "cpn/quadrature.hpp"
#include "cpn/rng.hpp"
#include "cpn/stats.hpp"

namespace cpn {

using cplx = std::complex<double>;

/// Thrown when an adaptive integral misses its tolerance.
class ToleranceError : public std::runtime_error {
public:
    ToleranceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

/// e^{ix} - 1 without cancellation at small x.
inline cplx expim1(double x) {
    const double s = std::sin(0.5 * x);
    return {-2.0 * s * s, std::sin(x)};
}

/// Charge law r on [-c, c]: a finite list of atoms. Densities are stored as
/// their Gauss-Legendre discretisation and used that way everywhere.
class ChargeDistribution {
public:
    struct Atom {
        double s;
        double w;
        bool operator==(const Atom&) const = default;
    };

    ChargeDistribution() : ChargeDistribution(std::vector<Atom>{{-1.0, 0.5}, {1.0, 0.5}}) {}

    explicit ChargeDistribution(std::vector<Atom> atoms, double bound = 0.0) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw ParameterError("charge distribution needs at least one atom");
        double total = 0.0;
        for (const auto& a : atoms_) {
            if (!(a.w >= 0.0)) throw ParameterError("charge weights must be nonnegative");
            if (a.s == 0.0) throw ParameterError("charge distribution must not charge 0");
            total += a.w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ParameterError("charge weights must sum to 1");
        for (auto& a : atoms_) a.w /= total;
        c_ = 0.0;
        for (const auto& a : atoms_) c_ = std::max(c_, std::abs(a.s));
        if (bound > 0.0) c_ = bound;
        cumulative_.resize(atoms_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) cumulative_[i] = acc += atoms_[i].w;
    }

    /// (delta_{-q} + delta_q)/2.
    static ChargeDistribution rademacher(double q = 1.0) { return ChargeDistribution({{-q, 0.5}, {q, 0.5}}); }

    /// Density on [-c, c] discretised with `nodes` Gauss-Legendre points (even, so 0 is never a node).
    static ChargeDistribution from_density(const std::function<double(double)>& density, double c, int nodes = 32) {
        if (nodes % 2) ++nodes;
        const GaussRule& g = gauss_legendre(nodes);
        std::vector<Atom> atoms;
        double total = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double s = c * g.x[i], w = c * g.w[i] * density(s);
            atoms.push_back({s, w});
            total += w;
        }
        for (auto& a : atoms) a.w /= total;
        return ChargeDistribution(std::move(atoms), c);
    }

    static ChargeDistribution uniform(double c, int nodes = 32) {
        return from_density([](double) { return 1.0; }, c, nodes);
    }

    [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }
    [[nodiscard]] double bound() const { return c_; }
    [[nodiscard]] double mean() const { return moment(1); }
    [[nodiscard]] double abs_mean() const {
        double m = 0.0;
        for (const auto& a : atoms_) m += a.w * std::abs(a.s);
        return m;
    }
    [[nodiscard]] double second_moment() const { return moment(2); }
    [[nodiscard]] double moment(int k) const {
        double m = 0.0;
        for (const auto& a : atoms_) m += a.w * std::pow(a.s, k);
        return m;
    }
    [[nodiscard]] bool symmetric(double tol = 1e-12) const {
        for (const auto& a : atoms_) {
            double w = 0.0;
            for (const auto& b : atoms_)
                if (std::abs(b.s + a.s) <= tol * c_) w += b.w;
            double wa = 0.0;
            for (const auto& b : atoms_)
                if (std::abs(b.s - a.s) <= tol * c_) wa += b.w;
            if (std::abs(w - wa) > tol) return false;
        }
        return true;
    }

    double sample(RngStream& rng) const { return atoms_[rng.discrete(cumulative_)].s; }

    bool operator==(const ChargeDistribution& o) const { return atoms_ == o.atoms_ && c_ == o.c_; }

private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    double c_ = 0.0;
};

/// Complex conjugate-symmetric interaction measure nu on [-c', c'] given by atoms.
class InteractionMeasure {
public:
    struct Atom {
        double alpha;
        cplx w;
        bool operator==(const Atom&) const = default;
    };

    InteractionMeasure() : InteractionMeasure(std::vector<Atom>{{-1.0, 0.5}, {1.0, 0.5}}) {}

    explicit InteractionMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        for (const auto& a : atoms_) {
            cplx partner{};
            for (const auto& b : atoms_)
                if (b.alpha == -a.alpha) partner += b.w;
            cplx self{};
            for (const auto& b : atoms_)
                if (b.alpha == a.alpha) self += b.w;
            if (std::abs(partner - std::conj(self)) > 1e-12 * (1.0 + std::abs(self)))
                throw ParameterError("interaction measure must satisfy nu(A) = conj(nu(-A))");
        }
    }

    /// (delta_{-b} + delta_b)/2.
    static InteractionMeasure rademacher(double b = 1.0) { return InteractionMeasure({{-b, 0.5}, {b, 0.5}}); }

    [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }
    [[nodiscard]] double total_variation() const {
        double t = 0.0;
        for (const auto& a : atoms_) t += std::abs(a.w);
        return t;
    }
    /// b = int |alpha| d|nu|.
    [[nodiscard]] double b() const {
        double t = 0.0;
        for (const auto& a : atoms_) t += std::abs(a.alpha) * std::abs(a.w);
        return t;
    }
    [[nodiscard]] double bound() const {
        double c = 0.0;
        for (const auto& a : atoms_) c = std::max(c, std::abs(a.alpha));
        return c;
    }
    [[nodiscard]] bool is_probability(double tol = 1e-12) const {
        double t = 0.0;
        for (const auto& a : atoms_) {
            if (std::abs(a.w.imag()) > tol || a.w.real() < 0.0) return false;
            t += a.w.real();
        }
        return std::abs(t - 1.0) <= tol;
    }

    /// Trigonometric energy density v(t) = int (1 - e^{i alpha t}) d nu(alpha) (real).
    [[nodiscard]] double density(double t) const {
        double v = 0.0;
        for (const auto& a : atoms_) v -= (a.w * expim1(a.alpha * t)).real();
        return v;
    }

    /// The measure as a charge law (requires a probability measure).
    [[nodiscard]] ChargeDistribution as_charges() const {
        if (!is_probability()) throw ParameterError("interaction measure is not a probability measure");
        std::vector<ChargeDistribution::Atom> at;
        for (const auto& a : atoms_) at.push_back({a.alpha, a.w.real()});
        return ChargeDistribution(at);
    }

    bool operator==(const InteractionMeasure&) const = default;

private:
    std::vector<Atom> atoms_;
};

/// A charge law read as an interaction measure (requires symmetry).
inline InteractionMeasure as_interaction(const ChargeDistribution& r) {
    if (!r.symmetric()) throw ParameterError("charge law must be symmetric to act as an interaction measure");
    std::vector<InteractionMeasure::Atom> at;
    for (const auto& a : r.atoms()) at.push_back({a.s, cplx(a.w, 0.0)});
    return InteractionMeasure(at);
}

// ---------------------------------------------------------------------------

/// Free marked Poisson configuration on `region` with activity z and charge law r.
inline MarkedConfiguration sample_free(const Region& region, double z, const ChargeDistribution& r, RngStream& rng) {
    region.validate();
    if (z < 0.0) throw ParameterError("activity must be >= 0");
    MarkedConfiguration c(region.dim);
    const std::uint64_t n = rng.poisson(z * region.volume());
    c.particles().reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        Point x{0.0, 0.0, 0.0};
        for (int i = 0; i < region.dim; ++i) x[i] = rng.uniform(region.lo[i], region.hi[i]);
        c.add(x, r.sample(rng));
    }
    return c;
}

/// Levy exponent psi(t) = z int (e^{i s t} - 1) dr(s).
inline cplx levy_psi(const ChargeDistribution& r, double z, double t) {
    cplx s{};
    for (const auto& a : r.atoms()) s += a.w * expim1(a.s * t);
    return z * s;
}

/// Smallest box containing every truncation ball around the configuration.
inline Region support_box(const MarkedConfiguration& c, double reach) {
    Region b;
    b.dim = c.dim();
    for (int i = 0; i < 3; ++i) {
        b.lo[i] = 0.0;
        b.hi[i] = 0.0;
    }
    for (int i = 0; i < b.dim; ++i) {
        double lo = kInf, hi = -kInf;
        for (const auto& p : c.particles()) {
            lo = std::min(lo, p.x[i]);
            hi = std::max(hi, p.x[i]);
        }
        b.lo[i] = lo - reach;
        b.hi[i] = hi + reach;
    }
    return b;
}

inline std::vector<Point> positions(const MarkedConfiguration& c) {
    std::vector<Point> p;
    for (const auto& q : c.particles()) p.push_back(q.x);
    return p;
}

/// log of the free characteristic functional: int psi(sum_j alpha_j G(x - y_j)) dx
/// over the union of truncation balls around the probe, with the probe
/// charges alpha_j. `psi` maps a field value to the Levy exponent.
template <class Psi>
IntegrationResult<cplx> log_functional_free(const Kernel& kernel, const MarkedConfiguration& probe, Psi&& psi,
                                           const QuadSettings& qs, double psi_bound) {
    if (probe.empty()) return {};
    const Region box = support_box(probe, kernel.truncation());
    auto f = [&](const Point& x) -> cplx {
        double t = 0.0;
        for (const auto& p : probe.particles()) {
            const double r = distance(x, p.x, probe.dim());
            t += p.s * kernel(r);
        }
        if (!std::isfinite(t)) return cplx{};
        return psi(t);
    };
    const auto cores = kernel.diverges() ? positions(probe) : std::vector<Point>{};
    return integrate_with_cores<cplx>(f, box, cores, qs, psi_bound);
}

/// Characteristic functional exp(int psi(sum_j alpha_j G(x - y_j)) dx) of the
/// free noise at the probe configuration.
inline cplx char_functional_free(const Kernel& kernel, const ChargeDistribution& r, double z,
                                 const MarkedConfiguration& probe, const QuadSettings& qs = {}) {
    if (probe.empty()) return 1.0;
    auto res = log_functional_free(kernel, probe, [&](double t) { return levy_psi(r, z, t); }, qs, 2.0 * z);
    if (!res.converged) throw ToleranceError("char_functional_free: quadrature did not converge", res.error);
    return std::exp(res.value);
}

/// Nonnegative test profile on R^d supported in a box.
struct TestProfile {
    int dim = 1;
    Region support;
    std::function<double(const Point&)> f;
    double sup = kInf;  ///< bound on f; infinite means unbounded

    double operator()(const Point& x) const { return support.contains(x) ? f(x) : 0.0; }

    /// h exp(-|x - c|^2 / (2 w^2)), truncated at 9 widths.
    static TestProfile gaussian(int dim, Point c, double width, double height) {
        TestProfile p;
        p.dim = dim;
        p.support = Region::box(dim, 0.0, 1.0);
        for (int i = 0; i < dim; ++i) {
            p.support.lo[i] = c[i] - 9.0 * width;
            p.support.hi[i] = c[i] + 9.0 * width;
        }
        p.f = [=](const Point& x) { return height * std::exp(-0.5 * squared_norm({x[0] - c[0], x[1] - c[1], x[2] - c[2]}, dim) / (width * width)); };
        p.sup = height;
        return p;
    }

    /// Kernel profile h G(|x - c|); unbounded for diverging kernels.
    static TestProfile kernel_bump(const Kernel& k, Point c, double height = 1.0) {
        TestProfile p;
        p.dim = k.dim();
        p.support = Region::box(p.dim, 0.0, 1.0);
        const double R = k.truncation();
        for (int i = 0; i < p.dim; ++i) {
            p.support.lo[i] = c[i] - R;
            p.support.hi[i] = c[i] + R;
        }
        const int dim = p.dim;
        p.f = [k, c, height, dim](const Point& x) { return height * k(distance(x, c, dim)); };
        p.sup = k.diverges() ? kInf : height * k(0.0);
        return p;
    }
};

struct LaplaceResult {
    double value = 1.0;       ///< exp(z int int (e^{|s| f} - 1) dr dy)
    double bound = 1.0;       ///< exp(z c |f|_inf e^{c |f|_inf} |f|_1)
    double log_value = 0.0;
    double error = 0.0;       ///< absolute error of log_value
};

/// Laplace functional E[e^{<|F|, f>}] of the free noise, with the closed-form upper bound.
inline LaplaceResult laplace_functional_free(const TestProfile& f, const ChargeDistribution& r, double z,
                                             const QuadSettings& qs = {}) {
    if (!std::isfinite(f.sup)) throw ParameterError("laplace functional needs a bounded profile");
    LaplaceResult out;
    const double c = r.bound();
    auto g = [&](const Point& x) {
        const double v = f(x);
        double s = 0.0;
        for (const auto& a : r.atoms()) s += a.w * std::expm1(std::abs(a.s) * v);
        return s;
    };
    auto res = integrate_box<double>(g, f.support, qs, std::expm1(c * f.sup));
    if (!res.converged) throw ToleranceError("laplace_functional_free: quadrature did not converge", res.error);
    auto l1 = integrate_box<double>([&](const Point& x) { return f(x); }, f.support, qs, f.sup);
    out.log_value = z * res.value;
    out.error = z * res.error;
    out.value = std::exp(out.log_value);
    out.bound = std::exp(z * c * f.sup * std::exp(c * f.sup) * l1.value);
    return out;
}

/// <|F|, f> for a configuration.
inline double pair_abs(const MarkedConfiguration& c, const TestProfile& f) {
    double s = 0.0;
    for (const auto& p : c.particles()) s += std::abs(p.s) * f(p.x);
    return s;
}

/// X(eta) = sum_j alpha_j X(y_j) for the field of `config`, alpha_j the probe charges.
inline double field_pairing(const MarkedConfiguration& probe, const MarkedConfiguration& config, const Kernel& kernel) {
    double s = 0.0;
    for (const auto& q : probe.particles()) s += q.s * eval_field_at(config, kernel, q.x);
    return s;
}

/// Monte Carlo estimate of E[e^{i X(probe)}] from independent free samples on
/// the probe's support box.
inline EstimatorResult char_functional_mc(const Kernel& kernel, const ChargeDistribution& r, double z,
                                          const MarkedConfiguration& probe, std::size_t samples, RngStream& rng) {
    std::vector<cplx> v;
    v.reserve(samples);
    if (probe.empty()) {
        v.assign(samples, 1.0);
        return batch_means(v);
    }
    const Region box = support_box(probe, kernel.truncation());
    for (std::size_t k = 0; k < samples; ++k) {
        const auto cfg = sample_free(box, z, r, rng);
        const double t = field_pairing(probe, cfg, kernel);
        v.push_back(std::isfinite(t) ? std::polar(1.0, t) : cplx{});
    }
    return batch_means(v);
}

/// Monte Carlo estimate of E[e^{<|F|, f>}] from independent free samples on the profile's support.
inline EstimatorResult laplace_functional_mc(const TestProfile& f, const ChargeDistribution& r, double z,
                                             std::size_t samples, RngStream& rng) {
    std::vector<double> v;
    v.reserve(samples);
    for (std::size_t k = 0; k < samples; ++k) v.push_back(std::exp(pair_abs(sample_free(f.support, z, r, rng), f)));
    return batch_means(v);
}

}  // namespace cpn
