#pragma once

// Energy densities v and the potentials U(eta) = int v(G * eta) dx, the
// cut-off potential U_Lambda, the mutual energy W and the stability constant.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/ensembles.hpp"
#include "cpn/fields.hpp"
#include "cpn/kernels.hpp"
#include "cpn/quadrature.hpp"

namespace cpn {

class NotApplicable : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SingularConfiguration : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class DensityKind { trigonometric, threshold, hard_core, quadratic_renormalized, lipschitz_custom };

inline std::string to_string(DensityKind k) {
    switch (k) {
        case DensityKind::trigonometric: return "trigonometric";
        case DensityKind::threshold: return "threshold";
        case DensityKind::hard_core: return "hard_core";
        case DensityKind::quadratic_renormalized: return "quadratic_renormalized";
        case DensityKind::lipschitz_custom: return "lipschitz_custom";
    }
    return "?";
}

/// Energy density v(t).
struct EnergyDensity {
    DensityKind kind = DensityKind::trigonometric;
    InteractionMeasure nu;                           ///< trigonometric
    double level = 0.5;                              ///< threshold C
    ThresholdMode mode = ThresholdMode::above;       ///< threshold
    int order = 2;                                   ///< hard_core l
    double a = 0.0, b = 0.0;                         ///< lipschitz_custom growth constants
    std::function<double(double)> custom;            ///< lipschitz_custom

    static EnergyDensity trigonometric(const InteractionMeasure& nu) {
        EnergyDensity d;
        d.kind = DensityKind::trigonometric;
        d.nu = nu;
        return d;
    }
    static EnergyDensity threshold(double C, ThresholdMode mode = ThresholdMode::above) {
        if (!(C > 0.0)) throw ParameterError("threshold level must be > 0");
        EnergyDensity d;
        d.kind = DensityKind::threshold;
        d.level = C;
        d.mode = mode;
        return d;
    }
    static EnergyDensity hard_core(int l = 2) {
        if (l < 2) throw ParameterError("hard-core overlap order must be >= 2");
        EnergyDensity d;
        d.kind = DensityKind::hard_core;
        d.order = l;
        return d;
    }
    static EnergyDensity quadratic_renormalized() {
        EnergyDensity d;
        d.kind = DensityKind::quadratic_renormalized;
        return d;
    }
    static EnergyDensity lipschitz_custom(double a, double b, std::function<double(double)> v) {
        EnergyDensity d;
        d.kind = DensityKind::lipschitz_custom;
        d.a = a;
        d.b = b;
        d.custom = std::move(v);
        return d;
    }

    double operator()(double t) const {
        switch (kind) {
            case DensityKind::trigonometric: return nu.density(t);
            case DensityKind::threshold:
                switch (mode) {
                    case ThresholdMode::above: return t >= level ? 1.0 : 0.0;
                    case ThresholdMode::abs_above: return std::abs(t) >= level ? 1.0 : 0.0;
                    case ThresholdMode::band: return t <= -level ? 1.0 : 0.0;
                }
                return 0.0;
            case DensityKind::hard_core: return t >= order ? kInf : 0.0;
            case DensityKind::quadratic_renormalized: return t * t;
            case DensityKind::lipschitz_custom: return custom(t);
        }
        return 0.0;
    }

    /// Lipschitz constant b (NaN when v is not Lipschitz).
    [[nodiscard]] double lipschitz() const {
        if (kind == DensityKind::trigonometric) return nu.b();
        if (kind == DensityKind::lipschitz_custom) return b;
        return std::numeric_limits<double>::quiet_NaN();
    }

    /// sup |v| (infinite when unbounded).
    [[nodiscard]] double bound() const {
        switch (kind) {
            case DensityKind::trigonometric: return 2.0 * nu.total_variation();
            case DensityKind::threshold: return 1.0;
            default: return kInf;
        }
    }

    [[nodiscard]] bool vanishes_at_zero() const { return (*this)(0.0) == 0.0; }
};

inline double trig_density_value(const InteractionMeasure& nu, double t) { return nu.density(t); }

struct PotentialResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    std::vector<double> breakdown;  ///< pair terms for the quadratic density

    [[nodiscard]] bool infinite() const { return std::isinf(value); }
};

// ---------------------------------------------------------------------------
// Hard-core geometry

namespace detail {

/// Radius of the smallest ball enclosing `pts` (at most 4 points in 3d).
inline double min_enclosing_radius(const std::vector<Point>& pts, int dim) {
    const std::size_t n = pts.size();
    if (n <= 1) return 0.0;
    auto encloses = [&](const Point& c, double r) {
        for (const auto& p : pts)
            if (distance(p, c, dim) > r * (1.0 + 1e-12) + 1e-15) return false;
        return true;
    };
    double best = kInf;
    // pairs
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            Point c{};
            for (int k = 0; k < 3; ++k) c[k] = 0.5 * (pts[i][k] + pts[j][k]);
            const double r = 0.5 * distance(pts[i], pts[j], dim);
            if (r < best && encloses(c, r)) best = r;
        }
    if (dim == 1) return best;
    // triples: circumcircle in their plane
    auto sub = [](const Point& a, const Point& b) { return Point{a[0] - b[0], a[1] - b[1], a[2] - b[2]}; };
    auto dot = [](const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) {
                const Point u = sub(pts[j], pts[i]), v = sub(pts[k], pts[i]);
                const double uu = dot(u, u), vv = dot(v, v), uv = dot(u, v);
                const double det = 2.0 * (uu * vv - uv * uv);
                if (std::abs(det) < 1e-300) continue;
                const double a = (uu * vv - vv * uv) / det, b = (vv * uu - uu * uv) / det;
                Point c{};
                for (int q = 0; q < 3; ++q) c[q] = pts[i][q] + a * u[q] + b * v[q];
                const double r = distance(c, pts[i], dim);
                if (r < best && encloses(c, r)) best = r;
            }
    if (dim == 2) return best;
    // quadruples: circumsphere
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k)
                for (std::size_t l = k + 1; l < n; ++l) {
                    const Point A = sub(pts[j], pts[i]), B = sub(pts[k], pts[i]), C = sub(pts[l], pts[i]);
                    const double m[3][3] = {{A[0], A[1], A[2]}, {B[0], B[1], B[2]}, {C[0], C[1], C[2]}};
                    const double rhs[3] = {0.5 * dot(A, A), 0.5 * dot(B, B), 0.5 * dot(C, C)};
                    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                    if (std::abs(det) < 1e-300) continue;
                    Point x{};
                    for (int col = 0; col < 3; ++col) {
                        double mm[3][3];
                        for (int r = 0; r < 3; ++r)
                            for (int q = 0; q < 3; ++q) mm[r][q] = q == col ? rhs[r] : m[r][q];
                        const double d = mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1]) -
                                         mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0]) +
                                         mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]);
                        x[col] = d / det;
                    }
                    Point c{};
                    for (int q = 0; q < 3; ++q) c[q] = pts[i][q] + x[q];
                    const double r = distance(c, pts[i], dim);
                    if (r < best && encloses(c, r)) best = r;
                }
    return best;
}

/// Number of equal charges q needed to reach the hard-core level.
inline int hard_core_multiplicity(const EnergyDensity& d, double q) {
    return std::max(1, static_cast<int>(std::ceil(d.order / q - 1e-12)));
}

inline void check_hard_core_inputs(const MarkedConfiguration& c, const KernelSpec& spec) {
    if (spec.variant != KernelVariant::indicator_ball)
        throw NotApplicable("hard-core test needs an indicator_ball kernel");
    for (const auto& p : c.particles())
        if (p.s != c[0].s || !(p.s > 0.0))
            throw NotApplicable("hard-core test needs equal positive charges");
}

/// True when some k of the balls (radius R, centres `pts`) share a point,
/// optionally requiring one of them to be `pts[must]`.
inline bool balls_share_point(const std::vector<Point>& pts, int dim, double R, int k, const Region* metric,
                              long must = -1) {
    const std::size_t n = pts.size();
    if (k <= 1) return must >= 0 || n > 0;
    if (static_cast<std::size_t>(k) > n) return false;
    auto dist = [&](std::size_t i, std::size_t j) {
        return metric ? metric->distance(pts[i], pts[j]) : distance(pts[i], pts[j], dim);
    };
    std::vector<std::size_t> chosen;
    if (must >= 0) chosen.push_back(static_cast<std::size_t>(must));
    std::function<bool(std::size_t)> rec = [&](std::size_t start) -> bool {
        if (static_cast<int>(chosen.size()) == k) {
            if (k == 2) return true;  // the pairwise distance test is exact
            std::vector<Point> sel;
            for (std::size_t i : chosen) {
                Point p = pts[chosen[0]];
                const Point d = metric ? metric->displacement(pts[i], pts[chosen[0]])
                                       : Point{pts[i][0] - p[0], pts[i][1] - p[1], pts[i][2] - p[2]};
                for (int q = 0; q < dim; ++q) p[q] += d[q];
                sel.push_back(p);
            }
            return min_enclosing_radius(sel, dim) < R;
        }
        for (std::size_t i = start; i < n; ++i) {
            if (must >= 0 && i == static_cast<std::size_t>(must)) continue;
            bool ok = true;
            for (std::size_t j : chosen)
                if (!(dist(i, j) < 2.0 * R)) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            chosen.push_back(i);
            if (rec(i + 1)) return true;
            chosen.pop_back();
        }
        return false;
    };
    return rec(0);
}

}  // namespace detail

/// True when the hard-core potential of the configuration is infinite.
inline bool hard_core_overlap(const MarkedConfiguration& c, const KernelSpec& spec, const EnergyDensity& d,
                              const Region* metric = nullptr) {
    if (c.empty()) return false;
    detail::check_hard_core_inputs(c, spec);
    return detail::balls_share_point(positions(c), c.dim(), spec.radius, detail::hard_core_multiplicity(d, c[0].s),
                                     metric);
}

// ---------------------------------------------------------------------------

namespace detail {

inline double field_sum(const MarkedConfiguration& c, const Kernel& k, const Point& x, const Region* periodic_region) {
    if (periodic_region && periodic_region->periodic()) return eval_field_at(c, k, x, periodic_region);
    const int dim = c.dim();
    const double rt2 = k.truncation() * k.truncation();
    double s = 0.0;
    for (const auto& p : c.particles()) {
        double r2 = 0.0;
        for (int i = 0; i < dim; ++i) r2 += (x[i] - p.x[i]) * (x[i] - p.x[i]);
        if (r2 > rt2) continue;
        s += p.s * k(std::sqrt(r2));
    }
    return s;
}

inline std::vector<Point> cores_in(const MarkedConfiguration& c, const Region& domain, bool diverging) {
    std::vector<Point> out;
    if (!diverging) return out;
    for (const auto& p : c.particles()) {
        Point q = domain.wrap(p.x);
        if (domain.contains(q)) out.push_back(q);
    }
    return out;
}

inline Region intersect(const Region& a, const Region& b, bool& empty) {
    Region r = a;
    empty = false;
    for (int i = 0; i < a.dim; ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::min(a.hi[i], b.hi[i]);
        if (!(r.hi[i] > r.lo[i])) empty = true;
    }
    return r;
}

}  // namespace detail

/// Pair sum sum_{l != j} s_l s_j Phi(y_l - y_j), the limit of the
/// self-energy-renormalised quadratic potential.
inline PotentialResult quadratic_renormalized_U(const MarkedConfiguration& c, const PairPotential& phi,
                                                const Region* metric = nullptr) {
    PotentialResult res;
    for (std::size_t l = 0; l < c.size(); ++l)
        for (std::size_t j = l + 1; j < c.size(); ++j) {
            const double r = metric ? metric->distance(c[l].x, c[j].x) : distance(c[l].x, c[j].x, c.dim());
            if (r == 0.0 && phi.diverges_at_zero()) throw SingularConfiguration("coincident positions with divergent pair potential");
            const double t = 2.0 * c[l].s * c[j].s * phi(r);
            res.breakdown.push_back(t);
            res.value += t;
        }
    return res;
}

/// Self-energy counterterm c_eps = Phi^eps(0) / int G^eps for a mollified kernel.
inline double renormalization_constant(const KernelSpec& spec) {
    if (spec.variant != KernelVariant::uv_regularized) throw NotApplicable("counterterm needs a mollified kernel");
    return pair_potential(spec, 0.0) / l1_norm(spec);
}

/// U(eta) = int v(G * eta) dx over R^d, or over `cutoff` when given (U_Lambda).
inline PotentialResult potential_U(const MarkedConfiguration& c, const Kernel& kernel, const EnergyDensity& d,
                                   const QuadSettings& qs = {}, const Region* cutoff = nullptr) {
    PotentialResult res;
    if (d.kind == DensityKind::hard_core) {
        res.value = hard_core_overlap(c, kernel.spec(), d, cutoff) ? kInf : 0.0;
        return res;
    }
    if (d.kind == DensityKind::quadratic_renormalized) return quadratic_renormalized_U(c, PairPotential(kernel.spec()), cutoff);
    if (!cutoff && !d.vanishes_at_zero()) throw std::domain_error("potential without cutoff needs v(0) = 0");
    if (c.empty() && !cutoff) return res;
    const Region domain = cutoff ? *cutoff : support_box(c, kernel.truncation());
    auto f = [&](const Point& x) {
        const double t = detail::field_sum(c, kernel, x, cutoff);
        if (!std::isfinite(t)) return 0.0;
        return d(t);
    };
    auto r = integrate_with_cores<double>(f, domain, detail::cores_in(c, domain, kernel.diverges()), qs, d.bound());
    res.value = r.value;
    res.error = r.error;
    res.converged = r.converged;
    if (!r.converged) throw ToleranceError("potential_U: quadrature did not converge", r.error);
    return res;
}

/// Mutual energy W(eta, gamma) = int [v(X_eta + X_gamma) - v(X_eta) - v(X_gamma)] dx.
inline double mutual_energy_W(const MarkedConfiguration& eta, const MarkedConfiguration& gamma, const Kernel& kernel,
                              const EnergyDensity& d, const QuadSettings& qs = {}, const Region* cutoff = nullptr) {
    if (eta.empty() || gamma.empty()) return 0.0;
    if (d.kind == DensityKind::hard_core) {
        const bool joint = hard_core_overlap(eta.united(gamma), kernel.spec(), d, cutoff);
        const bool apart = hard_core_overlap(eta, kernel.spec(), d, cutoff) || hard_core_overlap(gamma, kernel.spec(), d, cutoff);
        if (apart) return std::numeric_limits<double>::quiet_NaN();
        return joint ? kInf : 0.0;
    }
    if (d.kind == DensityKind::quadratic_renormalized) {
        const PairPotential phi(kernel.spec());
        double w = 0.0;
        for (const auto& p : eta.particles())
            for (const auto& q : gamma.particles()) {
                const double r = cutoff ? cutoff->distance(p.x, q.x) : distance(p.x, q.x, eta.dim());
                if (r == 0.0 && phi.diverges_at_zero()) throw SingularConfiguration("coincident positions");
                w += 2.0 * p.s * q.s * phi(r);
            }
        return w;
    }
    const double rt = kernel.truncation();
    Region domain;
    if (cutoff && cutoff->periodic()) {
        domain = *cutoff;
    } else {
        bool empty = false;
        domain = detail::intersect(support_box(eta, rt), support_box(gamma, rt), empty);
        if (!empty && cutoff) domain = detail::intersect(domain, *cutoff, empty);
        if (empty) return 0.0;
    }
    auto f = [&](const Point& x) {
        const double a = detail::field_sum(eta, kernel, x, cutoff), b = detail::field_sum(gamma, kernel, x, cutoff);
        if (!std::isfinite(a) || !std::isfinite(b)) return 0.0;
        return d(a + b) - d(a) - d(b);
    };
    auto cores = detail::cores_in(eta.united(gamma), domain, kernel.diverges());
    auto r = integrate_with_cores<double>(f, domain, cores, qs, 3.0 * d.bound());
    if (!r.converged) throw ToleranceError("mutual_energy_W: quadrature did not converge", r.error);
    return r.value;
}

/// Stability constant B = c b |G|_1 with U^- <= B N.
inline double stability_bound(const EnergyDensity& d, const KernelSpec& kernel, const ChargeDistribution& r) {
    const double b = d.lipschitz();
    if (std::isnan(b)) throw NotApplicable("stability bound needs a Lipschitz density (" + to_string(d.kind) + ")");
    return r.bound() * b * l1_norm(kernel);
}

}  // namespace cpn
