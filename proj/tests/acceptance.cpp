// Acceptance checks: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cpn/config.hpp"
#include "cpn/ensembles.hpp"
#include "cpn/fields.hpp"
#include "cpn/gcmc.hpp"
#include "cpn/kernels.hpp"
#include "cpn/limits.hpp"
#include "cpn/potentials.hpp"
#include "cpn/series.hpp"

using namespace cpn;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Point random_point(RngStream& rng, const Region& reg, double margin = 0.0) {
    Point x{0.0, 0.0, 0.0};
    for (int i = 0; i < reg.dim; ++i) x[i] = rng.uniform(reg.lo[i] + margin, reg.hi[i] - margin);
    return x;
}

// ---------------------------------------------------------------------------
// 1. Kernel laws

void kernel_laws(Outcome& out) {
    double worst_scaling = 0.0, worst_l1 = 0.0;
    for (double alpha : {0.25, 0.5, 0.75})
        for (int d : {2, 3}) {
            const double m0 = 1.3;
            for (double lambda : {0.5, 2.0, 4.0})
                for (double rho : {0.2, 0.7, 1.5}) {
                    const double lhs = std::pow(lambda, d - 2.0 * alpha) * eval_kernel(KernelSpec::bessel(alpha, m0, d), lambda * rho);
                    const double rhs = eval_kernel(KernelSpec::bessel(alpha, lambda * m0, d), rho);
                    worst_scaling = std::max(worst_scaling, rel(lhs, rhs));
                }
            // |G|_1 by radial quadrature of the tabulated profile
            auto spec = KernelSpec::bessel(alpha, m0, d);
            spec.tail_tolerance = 1e-13;
            const Kernel k(spec);
            const double mass = detail::radial_integral([&](double r) { return k(r); }, k.truncation(), d);
            worst_l1 = std::max(worst_l1, rel(mass, std::pow(m0, -2.0 * alpha)));
            worst_l1 = std::max(worst_l1, rel(l1_norm(spec), std::pow(m0, -2.0 * alpha)));
        }
    out.detail << "scaling max rel " << worst_scaling << ", L1 max rel " << worst_l1;
    out.require(worst_scaling < 1e-6, "scaling identity rel < 1e-6");
    out.require(worst_l1 < 1e-6, "L1 identity rel < 1e-6");
}

// ---------------------------------------------------------------------------
// 2. Free-noise exactness

void free_noise(Outcome& out) {
    RngStream rng(2024, 0, 0);
    const std::size_t n = 100000;
    double worst = 0.0;
    for (int c = 0; c < 5; ++c) {
        const int d = 1 + c % 2;
        const ChargeDistribution r({{-rng.uniform(0.2, 1.0), 0.5}, {rng.uniform(0.2, 1.0), 0.5}});
        const double z = rng.uniform(0.5, 3.0);
        Point centre{0.0, 0.0, 0.0};
        const auto f = TestProfile::gaussian(d, centre, rng.uniform(0.05, 0.2), rng.uniform(0.3, 1.0));
        const auto lap = laplace_functional_free(f, r, z);
        const auto lap_mc = laplace_functional_mc(f, r, z, n, rng);
        const double zl = std::abs(lap_mc.mean.real() - lap.value) / lap_mc.stderr();
        worst = std::max(worst, zl);

        auto spec = KernelSpec::bessel(rng.uniform(0.3, 0.9), rng.uniform(1.5, 3.0), 1);
        spec.tail_tolerance = 1e-8;
        const Kernel k(spec);
        MarkedConfiguration probe(1);
        for (int j = 0; j <= c % 3; ++j) probe.add({rng.uniform(0.0, 1.0), 0.0, 0.0}, rng.uniform(-1.0, 1.0));
        QuadSettings qs;
        qs.rel_tol = 1e-9;
        const cplx exact = char_functional_free(k, r, z, probe, qs);
        const auto mc = char_functional_mc(k, r, z, probe, n, rng);
        const double zc = z_score(exact, 0.0, mc.mean, mc.stderr());
        worst = std::max(worst, zc);
        out.detail << (c ? "; " : "") << "z_L=" << zl << " z_chi=" << zc;
    }
    out.require(worst < 3.0, "all z-scores < 3");
}

// ---------------------------------------------------------------------------
// 3. Sampler correctness

void sampler(Outcome& out) {
    // beta = 0: Poisson(z |Lambda|)
    GcmcParams p;
    p.region = Region::box(1, 0.0, 2.0);
    p.kernel = KernelSpec::indicator(0.2, 1);
    p.z = 2.5;
    p.beta = 0.0;
    p.seed = 31;
    p.burn_in = 2000;
    p.thinning = 20;
    GcmcChain chain(p);
    std::vector<double> ns;
    run(chain, 100000, [&](const GcmcChain& c, std::size_t) { ns.push_back(static_cast<double>(c.config().size())); });
    const double mu = p.z * p.region.volume();
    const auto mean = batch_means(ns);
    std::vector<double> sq;
    for (double x : ns) sq.push_back((x - mean.real()) * (x - mean.real()));
    const auto var = batch_means(sq);
    const double zm = std::abs(mean.real() - mu) / mean.stderr(), zv = std::abs(var.real() - mu) / var.stderr();
    out.detail << "Poisson mean " << mean.real() << " (z " << zm << "), var " << var.real() << " (z " << zv << ")";
    out.require(zm < 4.0 && zv < 4.0, "Poisson moments within 4 SE");

    // hard spheres: no overlap ever
    GcmcParams h;
    h.region = Region::box(2, 0.0, 1.0);
    h.kernel = KernelSpec::indicator(0.05, 2);
    h.density = EnergyDensity::hard_core(2);
    h.charges = ChargeDistribution({{1.0, 1.0}});
    h.z = 150.0;
    h.beta = 1.0;
    h.seed = 32;
    h.displacement = 0.05;
    GcmcChain hc(h);
    std::size_t overlaps = 0, max_n = 0;
    for (std::size_t s = 0; s < 1000000; ++s) {
        const auto info = hc.step();
        if (!info.accepted || info.type == MoveType::death) continue;
        const auto& c = hc.config();
        max_n = std::max(max_n, c.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j)
                if (distance(c[i].x, c[j].x, 2) < 2.0 * 0.05) ++overlaps;
    }
    out.detail << "; hard-sphere overlaps " << overlaps << " (max N " << max_n << ")";
    out.require(overlaps == 0, "zero hard-sphere overlaps");

    // enumerable toy: one constant field over the region, U = L v(S)
    GcmcParams t;
    t.region = Region::box(1, 0.0, 1.0);
    t.kernel = KernelSpec::indicator(1.5, 1);
    t.density = EnergyDensity::trigonometric(InteractionMeasure::rademacher(1.0));
    t.z = 1.5;
    t.beta = 0.8;
    t.seed = 33;
    t.w_displace = 0.0;
    const double L = 1.0, pb = 0.5, pd = 0.5;
    auto v = [&](double s) { return 1.0 - std::cos(s); };
    GcmcChain tc(t);
    struct Tally {
        double accepted = 0.0, expected = 0.0, var = 0.0;
    };
    std::map<std::tuple<int, int, int>, Tally> tallies;
    for (std::size_t s = 0; s < 2000000; ++s) {
        const auto& c = tc.config();
        const int n = static_cast<int>(c.size());
        int S = 0;
        for (const auto& q : c.particles()) S += q.s > 0 ? 1 : -1;
        const auto info = tc.step();
        double pacc = 0.0;
        if (info.type == MoveType::birth) {
            for (int sg : {-1, 1})
                pacc += 0.5 * std::min(1.0, pd / pb * t.z * L / (n + 1.0) * std::exp(-t.beta * L * (v(S + sg) - v(S))));
        } else {
            if (n == 0) continue;
            const int plus = (n + S) / 2, minus = n - plus;
            for (auto [sg, cnt] : {std::pair{1, plus}, std::pair{-1, minus}})
                pacc += double(cnt) / n * std::min(1.0, pb / pd * n / (t.z * L) * std::exp(-t.beta * L * (v(S - sg) - v(S))));
        }
        auto& ty = tallies[{static_cast<int>(info.type), n, S}];
        ty.accepted += info.accepted;
        ty.expected += pacc;
        ty.var += pacc * (1.0 - pacc);
    }
    double worst = 0.0;
    int states = 0;
    for (const auto& [key, ty] : tallies) {
        if (ty.var < 25.0) continue;
        ++states;
        worst = std::max(worst, std::abs(ty.accepted - ty.expected) / std::sqrt(ty.var));
    }
    out.detail << "; toy acceptance max z " << worst << " over " << states << " states";
    out.require(states >= 10 && worst < 4.0, "toy acceptance frequencies within 4 SE");
}

// ---------------------------------------------------------------------------
// 4. Ruelle bound

void ruelle(Outcome& out) {
    RngStream rng(4, 0, 0);
    int violations = 0, warnings = 0;
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        GcmcParams p;
        p.region = Region::box(1, 0.0, 1.0);
        p.kernel = KernelSpec::indicator(0.1, 1);
        const auto nu = InteractionMeasure::rademacher(rng.uniform(0.5, 1.5));
        p.density = EnergyDensity::trigonometric(nu);
        const auto dom = convergence_domain(Kernel(p.kernel), p.charges, nu);
        p.z = rng.uniform(0.05, 0.95) * std::min(dom.z_radius, 50.0);
        p.beta = rng.uniform(0.05, 0.95) * std::min(dom.beta_radius, 50.0);
        p.seed = 400 + c;
        p.burn_in = 500;
        p.thinning = 5;
        MarkedConfiguration eta(1);
        const int m = 1 + static_cast<int>(rng.below(3));
        for (int j = 0; j < m; ++j) eta.add({rng.uniform(0.0, 1.0), 0.0, 0.0}, rng.below(2) ? 1.0 : -1.0);
        const auto est = estimate_rho(eta, p, 2000);
        const double margin = std::abs(est.result.mean) - est.ruelle_bound;
        worst = std::max(worst, margin / std::max(est.result.stderr(), 1e-300));
        if (std::abs(est.result.mean) > est.ruelle_bound + 3.0 * est.result.stderr()) ++violations;
        if (!est.ruelle_ok) ++warnings;
    }
    out.detail << "violations " << violations << "/50, max (|rho| - bound)/se " << worst;
    out.require(violations == 0 && warnings == 0, "every estimate within the Ruelle bound");
}

// ---------------------------------------------------------------------------
// 5. Small-system oracle: constant field over Lambda, so U(config) = |Lambda| v(total charge)

void small_system(Outcome& out) {
    RngStream rng(5, 0, 0);
    const ChargeDistribution r({{-1.0, 0.4}, {0.6, 0.6}});
    const double L = 1.0, z = 0.3;
    double worst = 0.0;
    for (int c = 0; c < 10; ++c) {
        const double b = rng.uniform(0.5, 2.0), beta = rng.uniform(0.3, 2.0);
        auto v = [&](double s) { return 1.0 - std::cos(b * s); };
        MarkedConfiguration eta(1);
        const int m = 1 + static_cast<int>(rng.below(3));
        double s_eta = 0.0;
        for (int j = 0; j < m; ++j) {
            const double s = rng.uniform(-1.0, 1.0);
            eta.add({rng.uniform(0.0, 1.0), 0.0, 0.0}, s);
            s_eta += s;
        }
        // E_free[e^{-beta U(eta + F)}] summed over particle numbers n <= 4 and charge sequences
        auto expectation = [&](double shift) {
            double total = 0.0, pn = std::exp(-z * L);
            for (int n = 0; n <= 4; ++n) {
                if (n) pn *= z * L / n;
                double e = 0.0;
                for (int code = 0; code < (1 << n); ++code) {
                    double w = 1.0, S = shift;
                    for (int k = 0; k < n; ++k) {
                        const auto& a = r.atoms()[(code >> k) & 1];
                        w *= a.w;
                        S += a.s;
                    }
                    e += w * std::exp(-beta * L * v(S));
                }
                total += pn * e;
            }
            return total;
        };
        double tail = 1.0, pn = std::exp(-z * L);
        for (int n = 0; n <= 4; ++n) {
            if (n) pn *= z * L / n;
            tail -= pn;
        }
        const double oracle = expectation(s_eta) / expectation(0.0);
        GcmcParams p;
        p.region = Region::box(1, 0.0, L);
        p.kernel = KernelSpec::indicator(1.5, 1);
        p.density = EnergyDensity::trigonometric(InteractionMeasure::rademacher(b));
        p.charges = r;
        p.z = z;
        p.beta = beta;
        p.seed = 500 + c;
        p.burn_in = 1000;
        p.thinning = 5;
        const auto est = estimate_rho(eta, p, 20000);
        const double zs = std::abs(est.result.mean.real() - oracle) / std::hypot(est.result.stderr(), 2.0 * tail);
        worst = std::max(worst, zs);
    }
    out.detail << "max z-score " << worst << " over 10 configurations";
    out.require(worst < 3.0, "within 3 combined errors");
}

// ---------------------------------------------------------------------------
// 6. Potts projection

// Cin(c) = int_0^c (1 - cos t) / t dt
double cin(double c) {
    double s = 0.0, term = 1.0;
    for (int k = 1; k < 80; ++k) {
        term *= -c * c / ((2.0 * k - 1.0) * (2.0 * k));
        s -= term / (2.0 * k);
    }
    return s;
}

void potts(Outcome& out) {
    RngStream rng(6, 0, 0);
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
        const double b1 = rng.uniform(0.3, 1.5), b2 = rng.uniform(0.3, 1.5), w = rng.uniform(0.1, 0.9);
        const InteractionMeasure nu = c % 2 ? InteractionMeasure::rademacher(b1)
                                            : InteractionMeasure({{-b1, 0.5 * w}, {b1, 0.5 * w}, {-b2, 0.5 * (1.0 - w)}, {b2, 0.5 * (1.0 - w)}});
        auto spec = KernelSpec::bessel(0.5, rng.uniform(2.0, 4.0), 1);
        spec.tail_tolerance = 1e-8;
        const Kernel k(spec);
        const Region reg = Region::box(1, 0.0, 1.0);
        MarkedConfiguration eta(1);
        const int m = 1 + static_cast<int>(rng.below(3));
        for (int j = 0; j < m; ++j) eta.add({rng.uniform(0.0, 1.0), 0.0, 0.0}, rng.uniform(-2.0, 2.0));
        const double beta = rng.uniform(0.2, 2.0);
        RngStream srng(600 + c, 0, 0);
        const auto rep = potts_projection_check(eta, beta, nu, k, reg, 20000, srng);
        worst = std::max(worst, rep.z_score);
    }
    // one point: int (1 - cos(a s e^{-m|x|} / 2m)) dx = (2 / m) Cin(a s / 2m)
    const double m0 = 2.0, s = 1.7, beta = 0.9;
    auto spec = KernelSpec::bessel(1.0, m0, 1);
    spec.tail_tolerance = 1e-14;
    const Kernel k(spec);
    const auto nu = InteractionMeasure({{-0.8, 0.3}, {0.8, 0.3}, {-2.1, 0.2}, {2.1, 0.2}});
    double u = 0.0;
    for (const auto& a : nu.atoms()) u += a.w.real() * 2.0 / m0 * cin(a.alpha * s / (2.0 * m0));
    const double closed = std::exp(-beta * u);
    const double quad = potts_one_point(s, beta, nu, k);
    out.detail << "max z-score " << worst << " over 20 cases; one-point rel " << rel(quad, closed);
    out.require(worst < 3.0, "MC z-scores < 3");
    out.require(rel(quad, closed) < 1e-8, "one-point closed form rel < 1e-8");
}

// ---------------------------------------------------------------------------
// 7. Series consistency

void series(Outcome& out) {
    GcmcParams p;
    p.region = Region::box(1, 0.0, 1.0);
    auto base = KernelSpec::bessel(0.5, 3.0, 1);
    p.kernel = KernelSpec::uv_regularized(base, 0.1);
    p.kernel.tail_tolerance = 1e-10;
    const auto nu = InteractionMeasure::rademacher(1.0);
    p.density = EnergyDensity::trigonometric(nu);
    p.charges = ChargeDistribution::rademacher(1.0);
    p.z = 1.0;
    p.seed = 70;
    p.burn_in = 1000;
    p.thinning = 5;
    const Kernel k(p.kernel);
    const auto dom = convergence_domain(k, p.charges, nu);
    p.beta = dom.beta_radius / 10.0;
    MarkedConfiguration eta(1);
    eta.add({0.35, 0.0, 0.0}, 1.0);
    eta.add({0.6, 0.0, 0.0}, -0.5);
    const auto h = ht_series_rho(eta, p, 3, 4096, 8);
    const auto est = estimate_rho(eta, p, 40000);
    const double err = std::hypot(est.result.stderr(), h.rho.error_at(p.beta));
    const double zs = std::abs(h.rho(p.beta) - est.result.mean) / err;

    // first coefficient: sum_alpha w int (e^{i alpha X_eta(x)} - 1) exp(int psi(alpha G(x - y)) dy) dx
    auto inner = [&](double x, double alpha) {
        auto g = [&](double y) { return levy_psi(p.charges, p.z, alpha * k(std::abs(x - y))).real(); };
        std::vector<double> cuts{0.0, x, 1.0};
        for (int j = 1; j < 80; ++j) cuts.push_back(j / 80.0);
        std::sort(cuts.begin(), cuts.end());
        return panel_integrate(g, cuts, 20);
    };
    std::vector<double> outer;
    for (int j = 0; j <= 80; ++j) outer.push_back(j / 80.0);
    cplx a1{};
    for (const auto& a : nu.atoms()) {
        auto f = [&](double x) {
            double xe = 0.0;
            for (const auto& q : eta.particles()) xe += q.s * k(std::abs(x - q.x[0]));
            return (std::polar(1.0, a.alpha * xe) - 1.0) * std::exp(inner(x, a.alpha));
        };
        a1 += a.w * panel_integrate(f, outer, 20);
    }
    const double r1 = std::abs(h.rho.a[1] - a1) / std::abs(a1);
    out.detail << "beta " << p.beta << ": series " << h.rho(p.beta).real() << " vs Widom " << est.result.mean.real()
               << " (z " << zs << "); a1 rel " << r1;
    out.require(zs < 3.0, "series within combined error of the estimate");
    out.require(r1 < 1e-6, "first coefficient rel < 1e-6");
}

// ---------------------------------------------------------------------------
// 8. Duality

void duality(Outcome& out) {
    DualityPairing p;
    p.z = 2.0;
    p.beta = 0.0;
    p.kernel = KernelSpec::bessel(0.5, 2.0, 1);
    p.kernel.tail_tolerance = 1e-12;
    MarkedConfiguration eta(1);
    eta.add({0.3, 0.0, 0.0}, 0.7);
    eta.add({0.55, 0.0, 0.0}, -1.0);
    QuadSettings qs;
    qs.rel_tol = 1e-10;
    qs.abs_tol = 1e-12;
    const auto c = duality_closed_form(eta, p, qs);
    out.detail << "closed form rel " << c.rel_error;
    out.require(c.rel_error < 1e-8, "beta = 0 closed form rel < 1e-8");

    double worst = 0.0;
    int unreliable = 0;
    const std::vector<std::tuple<double, double, double>> cases{{0.3, 0.2, 0.4}, {0.2, 0.3, 0.7}, {0.4, 0.1, 0.5}};
    int idx = 0;
    for (auto [z, beta, y] : cases) {
        DualityPairing d;
        d.z = z;
        d.beta = beta;
        d.kernel = KernelSpec::uv_regularized(KernelSpec::bessel(0.5, 3.0, 1), 0.25);
        d.kernel.tail_tolerance = 1e-8;
        MarkedConfiguration one(1);
        one.add({y, 0.0, 0.0}, 1.0);
        GcmcParams s;
        s.seed = 80 + idx++;
        s.burn_in = 1000;
        s.thinning = 5;
        const auto rep = duality_check(one, d, s, 20000);
        worst = std::max(worst, rep.z_score);
        unreliable += !rep.reliable();
    }
    out.detail << "; sampled max z " << worst;
    out.require(worst < 3.0, "sampled one-point z-scores < 3");
    out.require(unreliable == 0, "no estimator warnings");
}

// ---------------------------------------------------------------------------
// 9. Continuum limit

void continuum(Outcome& out) {
    ScalingSchedule s;
    s.r = ChargeDistribution({{-1.5, 0.2}, {-0.5, 0.3}, {0.5, 0.3}, {1.5, 0.2}});
    s.t = ScalingSchedule::t_grid(2.0, 20);
    const auto rows = psi_limit_table(s);
    bool rate = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.detail << (i ? ", " : "sup error ") << rows[i].max_error;
        if (i) {
            const double ratio = rows[i - 1].max_error / rows[i].max_error;
            if (!(rows[i].max_error < rows[i - 1].max_error)) rate = false;
            // one decade in z: O(1/z) gives a ratio near 10 once z is large
            if (i >= 2 && !(ratio > 8.0 && ratio < 12.5)) rate = false;
        }
    }
    double worst = 0.0;
    const auto r = ChargeDistribution({{-0.5, 0.25}, {1.0, 0.75}});
    for (auto [d, lambda] : {std::pair{2, 2.0}, std::pair{1, 3.0}, std::pair{1, 0.5}}) {
        const auto f = TestProfile::gaussian(d, {0.2, 0.1, 0.0}, 0.3, 1.2);
        worst = std::max(worst, scaling_identity_check(r, lambda, f).rel_error);
    }
    out.detail << "; scaling identity rel " << worst;
    out.require(rate, "errors decrease at rate 1/z");
    out.require(worst < 1e-10, "scaling identity rel < 1e-10");
}

// ---------------------------------------------------------------------------
// 10. Triviality

void triviality(Outcome& out) {
    const auto r = ChargeDistribution::rademacher();
    const auto nu = InteractionMeasure::rademacher();
    const Region box = Region::box(2, 0.0, 1.0);
    QuadSettings qs;
    qs.rel_tol = 1e-6;
    qs.abs_tol = 1e-7;
    auto spec = KernelSpec::bessel(0.5, 1.0, 2);
    spec.tail_tolerance = 1e-8;
    const Kernel k(spec);
    auto moll = KernelSpec::uv_regularized(KernelSpec::bessel(0.5, 1.0, 2), 0.2);
    moll.tail_tolerance = 1e-8;
    const Kernel km(moll);
    std::vector<double> v, vm;
    bool flagged = false;
    for (double z : {1.0, 10.0, 100.0, 1000.0}) {
        const auto a = triviality_l2(z, nu, r, k, box, qs);
        const auto b = triviality_l2(z, nu, r, km, box, qs);
        v.push_back(a.value);
        vm.push_back(b.value);
        flagged = flagged || a.flagged || b.flagged;
    }
    const double plateau = triviality_plateau(nu, r, moll, box).value;
    bool decreasing = true;
    for (std::size_t i = 1; i < v.size(); ++i) decreasing = decreasing && v[i] < v[i - 1];
    out.detail << "E|V|^2 " << v[0] << ", " << v[1] << ", " << v[2] << ", " << v[3] << "; mollified " << vm[0] << " .. "
               << vm[3] << " (limit " << plateau << ")";
    // mollified control: distance to the z -> infinity value shrinks by a decade per decade of z
    bool plateaus = std::abs(vm[3] - plateau) < 1e-3 * plateau;
    for (std::size_t i = 1; i < vm.size(); ++i)
        plateaus = plateaus && std::abs(vm[i] - plateau) < std::abs(vm[i - 1] - plateau);
    out.require(decreasing, "unmollified values strictly decreasing");
    out.require(plateaus, "mollified values settle at the Gaussian limit");
    out.require(!flagged, "no quadrature flags");
}

// ---------------------------------------------------------------------------
// 11. Sine-Gordon

void sine_gordon(Outcome& out) {
    SineGordonSetup s;
    s.m0 = 1.0;
    s.tail_tolerance = 1e-8;
    s.f.push_back({{0.5, 0.5, 0.0}, 0.2, 1.0});
    const SineGordon sg(s);
    const std::vector<std::vector<Particle>> configs{
        {{{0.3, 0.5, 0.0}, 1.0}, {{0.7, 0.5, 0.0}, -1.0}},
        {{{0.4, 0.4, 0.0}, 1.0}, {{0.6, 0.6, 0.0}, 1.0}},
        {{{0.1, 0.9, 0.0}, 1.0}, {{0.9, 0.1, 0.0}, -1.0}},
        {{{0.2, 0.2, 0.0}, 1.0}, {{0.5, 0.8, 0.0}, -1.0}, {{0.8, 0.3, 0.0}, 1.0}},
        {{{0.45, 0.5, 0.0}, -1.0}, {{0.55, 0.5, 0.0}, 1.0}, {{0.5, 0.62, 0.0}, -1.0}}};
    QuadSettings qs;
    qs.rel_tol = 1e-6;
    qs.abs_tol = 1e-8;
    int monotone = 0;
    for (const auto& parts : configs) {
        MarkedConfiguration c(2);
        for (const auto& q : parts) c.add(q);
        const double g = sg.gaussian(c);
        double prev = kInf;
        bool ok = true;
        out.detail << (monotone || &parts != &configs.front() ? "; " : "") << "gaps";
        for (double z : {10.0, 100.0, 1000.0}) {
            const double gap = std::abs(sg.scaled(z, c, qs) - g);
            out.detail << " " << gap;
            ok = ok && gap < prev;
            prev = gap;
        }
        monotone += ok;
    }
    const Kernel g1(s.pair_kernel());
    const double rho = 1e-3 / s.m0;
    const double law = -std::log(rho) / (2.0 * std::numbers::pi);
    const double dev = rel(g1(rho), law);
    out.detail << "; G1 small-distance deviation " << dev;
    out.require(monotone == 5, "gaps decrease at all 5 configurations");
    out.require(dev < 0.02, "G1 within 2% of -ln(rho)/2pi");
}

// ---------------------------------------------------------------------------
// 12. Geometry

void geometry(Outcome& out) {
    const Region reg = Region::box(2, 0.0, 1.0);
    const std::vector<int> grids{64, 128, 256};

    const double R = 0.3;
    Kernel disk(KernelSpec::indicator(R, 2));
    MarkedConfiguration one(2);
    one.add({0.5, 0.5, 0.0}, 1.0);
    std::vector<double> fixed, ea;
    for (int n : grids) fixed.push_back(std::abs(threshold_volume(superpose(one, disk, reg, {n, n, 1}), 0.5) - std::numbers::pi * R * R));
    // a lattice count at one centre fluctuates from grid to grid; use the rms over centre shifts within a coarse cell
    const int shifts = 64;
    for (int n : grids) {
        RngStream rng(120, 0, 0);
        double s2 = 0.0;
        for (int k = 0; k < shifts; ++k) {
            MarkedConfiguration c(2);
            c.add({0.5 + rng.uniform(0.0, 1.0 / 64), 0.5 + rng.uniform(0.0, 1.0 / 64), 0.0}, 1.0);
            const double e = threshold_volume(superpose(c, disk, reg, {n, n, 1}), 0.5) - std::numbers::pi * R * R;
            s2 += e * e;
        }
        ea.push_back(std::sqrt(s2 / shifts));
    }

    // e^{-r} / (2 pi r) crosses C at r0
    Kernel bes(KernelSpec::bessel(0.5, 1.0, 2));
    const double r0 = 0.3, C = std::exp(-r0) / (2.0 * std::numbers::pi * r0);
    std::vector<double> el;
    for (int n : grids) el.push_back(std::abs(contour_length(superpose(one, bes, reg, {n, n, 1}), C) - 2.0 * std::numbers::pi * r0));

    const double ra1 = ea[0] / ea[1], ra2 = ea[1] / ea[2], rl1 = el[0] / el[1], rl2 = el[1] / el[2];
    out.detail << "fixed-centre area errors " << fixed[0] << ", " << fixed[1] << ", " << fixed[2] << "; rms area errors " << ea[0] << ", " << ea[1] << ", " << ea[2] << " (ratios " << ra1 << ", " << ra2
               << "); length errors " << el[0] << ", " << el[1] << ", " << el[2] << " (ratios " << rl1 << ", " << rl2 << ")";
    out.require(ra1 >= 1.5 && ra2 >= 1.5, "rms area error ratios >= 1.5");
    out.require(rl1 >= 1.5 && rl2 >= 1.5, "length error ratios >= 1.5");
}

// ---------------------------------------------------------------------------
// 13. Moments

void moments(Outcome& out) {
    GcmcParams p;
    p.region = Region::box(1, 0.0, 1.0);
    p.kernel = KernelSpec::indicator(0.1, 1);
    p.density = EnergyDensity::trigonometric(InteractionMeasure::rademacher(1.0));
    p.charges = ChargeDistribution({{-0.5, 0.5}, {1.0, 0.5}});
    p.z = 3.0;
    p.beta = 0.3;
    p.burn_in = 2000;
    p.thinning = 10;
    const std::vector<TestProfile> f{TestProfile::gaussian(1, {0.3, 0.0, 0.0}, 0.15, 1.0),
                                     TestProfile::gaussian(1, {0.6, 0.0, 0.0}, 0.2, 0.8),
                                     TestProfile::gaussian(1, {0.5, 0.0, 0.0}, 0.3, 1.2)};
    p.seed = 130;
    const auto direct = estimate_moments(f, p, 40000);
    double worst = 0.0;
    for (int l = 1; l <= 3; ++l) {
        GcmcParams q = p;
        q.seed = 131 + l;
        const std::vector<TestProfile> fl(f.begin(), f.begin() + l);
        const auto part = moments_from_rho_mc(fl, q, 40000);
        const double zs = z_score(part.mean, part.stderr(), direct[l - 1].mean, direct[l - 1].stderr());
        worst = std::max(worst, zs);
        out.detail << (l > 1 ? "; " : "") << "l=" << l << " " << part.mean.real() << " vs " << direct[l - 1].mean.real()
                   << " (z " << zs << ")";
    }
    out.require(worst < 3.0, "partition formula within combined 3 sigma");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"kernel laws", kernel_laws},         {"free-noise exactness", free_noise},
        {"sampler correctness", sampler},     {"Ruelle bound", ruelle},
        {"small-system oracle", small_system}, {"Potts projection", potts},
        {"series consistency", series},       {"duality", duality},
        {"continuum limit", continuum},       {"triviality", triviality},
        {"sine-Gordon", sine_gordon},         {"geometry", geometry},
        {"moments", moments}};
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.str().c_str(),
                    secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed;
}
