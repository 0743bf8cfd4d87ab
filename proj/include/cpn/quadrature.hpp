#pragma once

// Numerical integration: Gauss-Legendre rules, 1-d adaptive Gauss-Kronrod,
// adaptive tensor-Gauss cubature over boxes, integration around point
// singularities, and randomized quasi-Monte Carlo.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/sobol.hpp>

#include "cpn/geometry.hpp"
#include "cpn/special.hpp"

namespace cpn {

/// Nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

namespace detail {

inline GaussRule make_gauss_legendre(int n) {
    GaussRule r;
    r.x.assign(n, 0.0);
    r.w.assign(n, 0.0);
    if (n == 1) {
        r.w[0] = 2.0;
        return r;
    }
    auto legendre = [n](double z, double& dp) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        return p1;
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double dz = legendre(z, dp) / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        legendre(z, dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

}  // namespace detail

/// Cached n-point Gauss-Legendre rule.
inline const GaussRule& gauss_legendre(int n) {
    if (n < 1 || n > 512) throw std::invalid_argument("gauss_legendre: order out of range");
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_legendre(n)).first;
    return it->second;
}

/// Fixed-order Gauss-Legendre integral of f over [a, b].
template <class F>
auto gauss_integrate(F&& f, double a, double b, int n) {
    const auto& g = gauss_legendre(n);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    decltype(f(a)) s{};
    for (int i = 0; i < n; ++i) s += g.w[i] * f(c + h * g.x[i]);
    return s * h;
}

template <class T>
struct IntegrationResult {
    T value{};
    double error = 0.0;
    std::size_t evals = 0;
    bool converged = true;
};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

/// Adaptive 15-point Gauss-Kronrod on [a, b] (real or complex integrands).
template <class F>
auto integrate_1d(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 18) {
    using T = decltype(f(a));
    IntegrationResult<T> r;
    if (a == b) return r;
    double err = 0.0, l1 = 0.0;
    std::size_t count = 0;
    const bool finite = std::isfinite(a) && std::isfinite(b);
    const double len = b - a;
    auto counted = [&](double x) {
        ++count;
        return finite ? f(a + len * x) * len : f(x);
    };
    r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(counted, finite ? 0.0 : a, finite ? 1.0 : b,
                                                                            max_depth, rel_tol, &err, &l1);
    r.error = err;
    r.evals = count;
    r.converged = err <= std::max(rel_tol * l1, 1e-300) * 10.0 || err < 1e-300;
    return r;
}

/// Sum of fixed-order Gauss rules over consecutive panels with boundaries `cuts`.
template <class F>
auto panel_integrate(F&& f, const std::vector<double>& cuts, int n) {
    decltype(f(cuts.front())) s{};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += gauss_integrate(f, cuts[i], cuts[i + 1], n);
    return s;
}

/// Settings shared by the multi-dimensional integrators.
struct QuadSettings {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    std::size_t max_evals = 4'000'000;
    int order = 5;             ///< Gauss points per axis in a cell
    int max_depth = 30;        ///< bisection depth limit per cell
    double initial_cell = 0;   ///< initial cell edge; 0 picks a quarter of the shortest side
    double core_radius = 0.25; ///< upper bound on the polar disks around singular points
    int angular_points = 32;
};

namespace detail {

struct Cell {
    Point lo, hi;
    int depth = 0;
};

template <class T, class F>
std::pair<T, double> cell_rule(F& f, const Cell& c, int dim, int order, double f_bound,
                               std::size_t& evals) {
    const GaussRule& hi_rule = gauss_legendre(order);
    const GaussRule& lo_rule = gauss_legendre(std::max(1, order - 2));
    auto tensor = [&](const GaussRule& g) {
        const int n = static_cast<int>(g.x.size());
        T s{};
        Point x{0.0, 0.0, 0.0};
        double vol = 1.0;
        Point mid, half;
        for (int i = 0; i < dim; ++i) {
            mid[i] = 0.5 * (c.lo[i] + c.hi[i]);
            half[i] = 0.5 * (c.hi[i] - c.lo[i]);
            vol *= half[i];
        }
        const int n1 = n, n2 = dim > 1 ? n : 1, n3 = dim > 2 ? n : 1;
        for (int a = 0; a < n1; ++a) {
            x[0] = mid[0] + half[0] * g.x[a];
            for (int b = 0; b < n2; ++b) {
                if (dim > 1) x[1] = mid[1] + half[1] * g.x[b];
                for (int k = 0; k < n3; ++k) {
                    if (dim > 2) x[2] = mid[2] + half[2] * g.x[k];
                    double w = g.w[a];
                    if (dim > 1) w *= g.w[b];
                    if (dim > 2) w *= g.w[k];
                    s += w * f(x);
                    ++evals;
                }
            }
        }
        return std::pair<T, double>(s * vol, vol);
    };
    auto [qh, vol] = tensor(hi_rule);
    auto [ql, vol2] = tensor(lo_rule);
    (void)vol2;
    double err = magnitude(qh - ql);
    const double cell_volume = vol * std::pow(2.0, dim);
    if (std::isfinite(f_bound)) err = std::min(err, 2.0 * f_bound * cell_volume);
    return {qh, err};
}

}  // namespace detail

/// Adaptive cubature of f over an axis-aligned box (dimension 1 to 3).
/// `f_bound`, when finite, bounds |f| and caps each cell's error estimate.
template <class T, class F>
IntegrationResult<T> integrate_box(F&& f, const Region& box, const QuadSettings& qs,
                                   double f_bound = std::numeric_limits<double>::infinity()) {
    const int dim = box.dim;
    IntegrationResult<T> res;
    double h0 = qs.initial_cell;
    if (h0 <= 0) {
        h0 = std::numeric_limits<double>::infinity();
        for (int i = 0; i < dim; ++i) h0 = std::min(h0, box.length(i) / 4.0);
    }
    std::array<int, 3> n{1, 1, 1};
    for (int i = 0; i < dim; ++i) n[i] = std::max(1, static_cast<int>(std::ceil(box.length(i) / h0 - 1e-9)));

    struct Item {
        detail::Cell cell;
        T value;
        double err;
    };
    auto cmp = [](const Item& a, const Item& b) { return a.err < b.err; };
    std::priority_queue<Item, std::vector<Item>, decltype(cmp)> heap(cmp);
    T total{};
    double total_err = 0.0;
    T frozen{};
    double frozen_err = 0.0;

    for (int a = 0; a < n[0]; ++a)
        for (int b = 0; b < n[1]; ++b)
            for (int c = 0; c < n[2]; ++c) {
                detail::Cell cell;
                const std::array<int, 3> idx{a, b, c};
                for (int i = 0; i < 3; ++i) {
                    if (i < dim) {
                        const double L = box.length(i) / n[i];
                        cell.lo[i] = box.lo[i] + idx[i] * L;
                        cell.hi[i] = (idx[i] + 1 == n[i]) ? box.hi[i] : box.lo[i] + (idx[i] + 1) * L;
                    } else {
                        cell.lo[i] = cell.hi[i] = 0.0;
                    }
                }
                auto [q, e] = detail::cell_rule<T>(f, cell, dim, qs.order, f_bound, res.evals);
                total += q;
                total_err += e;
                heap.push({cell, q, e});
            }

    std::size_t iter = 0;
    while (!heap.empty()) {
        const double target = std::max(qs.abs_tol, qs.rel_tol * magnitude(total + frozen));
        if (total_err + frozen_err <= target) break;
        if (res.evals >= qs.max_evals) {
            res.converged = false;
            break;
        }
        Item it = heap.top();
        heap.pop();
        total -= it.value;
        total_err -= it.err;
        if (it.cell.depth >= qs.max_depth) {
            frozen += it.value;
            frozen_err += it.err;
            continue;
        }
        const int nchild = 1 << dim;
        for (int k = 0; k < nchild; ++k) {
            detail::Cell ch;
            ch.depth = it.cell.depth + 1;
            for (int i = 0; i < 3; ++i) {
                if (i < dim) {
                    const double mid = 0.5 * (it.cell.lo[i] + it.cell.hi[i]);
                    const bool upper = (k >> i) & 1;
                    ch.lo[i] = upper ? mid : it.cell.lo[i];
                    ch.hi[i] = upper ? it.cell.hi[i] : mid;
                } else {
                    ch.lo[i] = ch.hi[i] = 0.0;
                }
            }
            auto [q, e] = detail::cell_rule<T>(f, ch, dim, qs.order, f_bound, res.evals);
            total += q;
            total_err += e;
            heap.push({ch, q, e});
        }
        if (++iter % 4096 == 0) {
            // refresh running sums to limit cancellation drift
            auto copy = heap;
            T s{};
            double es = 0.0;
            while (!copy.empty()) {
                s += copy.top().value;
                es += copy.top().err;
                copy.pop();
            }
            total = s;
            total_err = es;
        }
    }
    res.value = total + frozen;
    res.error = std::max(0.0, total_err) + frozen_err;
    if (res.error > std::max(qs.abs_tol, qs.rel_tol * magnitude(res.value)) * 1.0000001) res.converged = false;
    return res;
}

namespace detail {

/// Smooth partition weight: 1 for t <= 1/2, 0 for t >= 1.
inline double core_weight(double t) {
    if (t <= 0.5) return 1.0;
    if (t >= 1.0) return 0.0;
    const double u = (1.0 - t) / 0.5;  // in (0, 1)
    const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
}

}  // namespace detail

/// Integral over `domain` of a function with integrable point singularities
/// at `cores`. Each core gets a disk handled in polar coordinates; a smooth
/// partition of unity hands the rest to the box integrator. The integrand
/// must accept points anywhere within the disks (and periodic images when
/// the domain is periodic).
template <class T, class F>
IntegrationResult<T> integrate_with_cores(F&& f, const Region& domain, const std::vector<Point>& cores,
                                          const QuadSettings& qs,
                                          double f_bound = std::numeric_limits<double>::infinity()) {
    const int dim = domain.dim;
    const std::size_t nc = cores.size();
    if (nc == 0) return integrate_box<T>(f, domain, qs, f_bound);

    double scale = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim; ++i) scale = std::min(scale, domain.length(i));
    std::vector<double> radius(nc, qs.core_radius);
    for (std::size_t j = 0; j < nc; ++j) {
        for (std::size_t k = 0; k < nc; ++k)
            if (k != j) radius[j] = std::min(radius[j], 0.45 * domain.distance(cores[j], cores[k]));
        if (!domain.periodic())
            for (int i = 0; i < dim; ++i)
                radius[j] = std::min({radius[j], cores[j][i] - domain.lo[i], domain.hi[i] - cores[j][i]});
        if (domain.periodic())
            for (int i = 0; i < dim; ++i) radius[j] = std::min(radius[j], 0.45 * domain.length(i));
        if (radius[j] < 1e-9 * scale) radius[j] = 0.0;
    }

    auto remainder = [&](const Point& x) -> T {
        double w = 1.0;
        for (std::size_t j = 0; j < nc; ++j) {
            if (radius[j] == 0.0) continue;
            const double r = domain.distance(x, cores[j]);
            if (r < radius[j]) {
                w = 1.0 - detail::core_weight(r / radius[j]);
                break;
            }
        }
        if (w == 0.0) return T{};
        return w * f(x);
    };

    QuadSettings qs_box = qs;
    auto res = integrate_box<T>(remainder, domain, qs_box, f_bound);

    // angular rule
    std::vector<Point> dirs;
    std::vector<double> dw;
    if (dim == 1) {
        dirs = {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
        dw = {1.0, 1.0};
    } else if (dim == 2) {
        const int m = qs.angular_points;
        for (int k = 0; k < m; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / m;
            dirs.push_back({std::cos(th), std::sin(th), 0.0});
            dw.push_back(2.0 * std::numbers::pi / m);
        }
    } else {
        const int m = qs.angular_points;
        const int nt = std::max(4, m / 2);
        const GaussRule& g = gauss_legendre(nt);
        for (int a = 0; a < nt; ++a) {
            const double ct = g.x[a], st = std::sqrt(1.0 - ct * ct);
            for (int k = 0; k < m; ++k) {
                const double ph = 2.0 * std::numbers::pi * (k + 0.5) / m;
                dirs.push_back({st * std::cos(ph), st * std::sin(ph), ct});
                dw.push_back(g.w[a] * 2.0 * std::numbers::pi / m);
            }
        }
    }
    const double sphere = unit_sphere_area(dim);

    for (std::size_t j = 0; j < nc; ++j) {
        const double R = radius[j];
        if (R == 0.0) continue;
        // r = R e^{-u}: dr = -r du, integrand chi(r/R) r^d A(r)
        double r_stop = R * 1e-14;
        if (std::isfinite(f_bound) && f_bound > 0) {
            const double cut = 0.01 * qs.abs_tol / nc * dim / (sphere * f_bound);
            r_stop = std::max(r_stop, std::min(0.5 * R, std::pow(cut, 1.0 / dim)));
        }
        const double u_max = std::log(R / r_stop);
        auto radial = [&](double u) -> T {
            const double r = R * std::exp(-u);
            const double w = detail::core_weight(r / R) * std::pow(r, dim);
            if (w == 0.0) return T{};
            T a{};
            for (std::size_t k = 0; k < dirs.size(); ++k) {
                Point x = cores[j];
                for (int i = 0; i < dim; ++i) x[i] += r * dirs[k][i];
                a += dw[k] * f(x);
            }
            return w * a;
        };
        auto part = integrate_1d(radial, 0.0, u_max, std::max(qs.rel_tol * 0.1, 1e-13), 20);
        res.value += part.value;
        res.error += part.error;
        res.evals += part.evals * dirs.size();
        if (std::isfinite(f_bound)) {
            res.error += f_bound * sphere * std::pow(r_stop, dim) / dim;
        } else {
            res.error += magnitude(radial(u_max)) / std::max(1.0, static_cast<double>(dim));
        }
    }
    res.converged = res.converged && res.error <= std::max(qs.abs_tol, qs.rel_tol * magnitude(res.value)) * 10.0;
    return res;
}

/// Result of a randomized quasi-Monte Carlo integral over the unit cube.
template <class T>
struct QmcResult {
    T mean{};
    double stderr = 0.0;
    std::size_t points = 0;
};

/// Randomized (Cranley-Patterson shifted) Sobol integration of f over [0,1)^dim.
/// `shift_source` must yield uniforms in [0,1) for the random shifts.
template <class T, class F, class U>
QmcResult<T> qmc_integrate(int dim, std::size_t n_points, int replicates, F&& f, U&& shift_source) {
    QmcResult<T> r;
    if (dim == 0) {
        std::vector<double> u;
        r.mean = f(u);
        r.points = 1;
        return r;
    }
    const std::size_t per = std::max<std::size_t>(1, n_points / replicates);
    std::vector<std::vector<double>> base(per, std::vector<double>(dim));
    {
        boost::random::sobol gen(dim);
        gen.discard(dim);  // skip the origin
        const double scale = std::ldexp(1.0, -64);
        for (std::size_t i = 0; i < per; ++i)
            for (int k = 0; k < dim; ++k) base[i][k] = static_cast<double>(gen()) * scale;
    }
    std::vector<T> reps(replicates);
    std::vector<double> u(dim), shift(dim);
    for (int q = 0; q < replicates; ++q) {
        for (int k = 0; k < dim; ++k) shift[k] = shift_source();
        T s{};
        for (std::size_t i = 0; i < per; ++i) {
            for (int k = 0; k < dim; ++k) {
                double v = base[i][k] + shift[k];
                u[k] = v >= 1.0 ? v - 1.0 : v;
            }
            s += f(u);
        }
        reps[q] = s / static_cast<double>(per);
    }
    T m{};
    for (auto& v : reps) m += v;
    m /= static_cast<double>(replicates);
    double var = 0.0;
    for (auto& v : reps) var += std::norm(std::complex<double>(v - m));
    r.mean = m;
    r.stderr = replicates > 1 ? std::sqrt(var / (replicates - 1) / replicates) : 0.0;
    r.points = per * replicates;
    return r;
}

}  // namespace cpn
