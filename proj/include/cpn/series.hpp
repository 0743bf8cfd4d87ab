#pragma once

// Convergence constants, high-temperature series for the correlation
// functional, the two-component projection identity and moments from
// correlation functionals.

#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/ensembles.hpp"
#include "cpn/gcmc.hpp"
#include "cpn/kernels.hpp"
#include "cpn/potentials.hpp"
#include "cpn/quadrature.hpp"
#include "cpn/rng.hpp"
#include "cpn/special.hpp"
#include "cpn/stats.hpp"

namespace cpn {

namespace detail {

/// Radial integral S_d int_0^R rho^{d-1} g(rho) drho on logarithmic panels.
template <class G>
auto radial_integral(G&& g, double R, int dim, double jump = 0.0) {
    std::vector<double> cuts{0.0};
    for (int k = 16; k >= 0; --k) {
        const double a = R * std::pow(10.0, -k - 1), b = R * std::pow(10.0, -k);
        for (int j = 0; j < 8; ++j) cuts.push_back(a * std::pow(b / a, (j + 1) / 8.0));
    }
    if (jump > 0.0 && jump < R) {
        cuts.push_back(jump);
        std::sort(cuts.begin(), cuts.end());
    }
    auto h = [&](double rho) { return std::pow(rho, dim - 1) * g(rho); };
    return unit_sphere_area(dim) * panel_integrate(h, cuts, 24);
}

/// int_{R^d} 2 |sin(theta G(y) / 2)| dy.
inline double sine_mass(const Kernel& k, double theta) {
    if (theta == 0.0) return 0.0;
    const auto& s = k.spec();
    if (s.variant == KernelVariant::indicator_ball)
        return unit_ball_volume(s.dim) * std::pow(s.radius, s.dim) * 2.0 * std::abs(std::sin(0.5 * theta));
    return radial_integral([&](double r) { return 2.0 * std::abs(std::sin(0.5 * theta * k(r))); }, k.truncation(),
                           s.dim);
}

}  // namespace detail

struct ConvergenceDomain {
    double C1 = 0.0, C2 = 0.0;
    double z_radius = kInf, beta_radius = kInf;
    double C1_majorant = 0.0, C2_majorant = 0.0;  ///< c b |G|_1 and c' b' |G|_1

    [[nodiscard]] bool contains(double z, double beta) const { return z < z_radius && beta < beta_radius; }
};

/// C1 = sup_s int int |e^{i s alpha G(y)} - 1| d|nu|(alpha) dy.
inline double compute_C1(const Kernel& k, const ChargeDistribution& r, const InteractionMeasure& nu) {
    double best = 0.0;
    for (const auto& s : r.atoms()) {
        double t = 0.0;
        for (const auto& a : nu.atoms()) t += std::abs(a.w) * detail::sine_mass(k, s.s * a.alpha);
        best = std::max(best, t);
    }
    return best;
}

/// C2 = sup_alpha int int |e^{i s alpha G(y)} - 1| dr(s) dy.
inline double compute_C2(const Kernel& k, const ChargeDistribution& r, const InteractionMeasure& nu) {
    double best = 0.0;
    for (const auto& a : nu.atoms()) {
        double t = 0.0;
        for (const auto& s : r.atoms()) t += s.w * detail::sine_mass(k, s.s * a.alpha);
        best = std::max(best, t);
    }
    return best;
}

inline ConvergenceDomain convergence_domain(const Kernel& k, const ChargeDistribution& r, const InteractionMeasure& nu) {
    ConvergenceDomain d;
    d.C1 = compute_C1(k, r, nu);
    d.C2 = compute_C2(k, r, nu);
    d.z_radius = d.C1 > 0.0 ? 1.0 / (std::exp(1.0) * d.C1) : kInf;
    d.beta_radius = d.C2 > 0.0 ? 1.0 / (std::exp(1.0) * d.C2) : kInf;
    const double g1 = l1_norm(k.spec());
    d.C1_majorant = r.bound() * nu.b() * g1;
    d.C2_majorant = nu.bound() * r.abs_mean() * g1;
    return d;
}

/// Power series in beta truncated at a fixed order, with per-coefficient error estimates.
struct TruncatedSeries {
    std::vector<cplx> a;
    std::vector<double> err;
    std::vector<bool> flagged;

    TruncatedSeries() = default;
    explicit TruncatedSeries(int order) : a(order + 1), err(order + 1, 0.0), flagged(order + 1, false) {}

    [[nodiscard]] int order() const { return static_cast<int>(a.size()) - 1; }

    [[nodiscard]] cplx operator()(double beta) const {
        cplx s{};
        for (int n = order(); n >= 0; --n) s = s * beta + a[n];
        return s;
    }
    /// Propagated coefficient error at beta.
    [[nodiscard]] double error_at(double beta) const {
        double e = 0.0, p = 1.0;
        for (int n = 0; n <= order(); ++n, p *= beta) e += err[n] * p;
        return e;
    }

    friend TruncatedSeries operator*(const TruncatedSeries& x, const TruncatedSeries& y) {
        const int n = std::min(x.order(), y.order());
        TruncatedSeries r(n);
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) {
                r.a[i + j] += x.a[i] * y.a[j];
                r.err[i + j] += x.err[i] * std::abs(y.a[j]) + std::abs(x.a[i]) * y.err[j];
                if (x.flagged[i] || y.flagged[j]) r.flagged[i + j] = true;
            }
        return r;
    }

    friend TruncatedSeries operator/(const TruncatedSeries& x, const TruncatedSeries& y) {
        if (std::abs(y.a[0]) == 0.0) throw std::domain_error("series division by a series with zero constant term");
        const int n = std::min(x.order(), y.order());
        TruncatedSeries q(n);
        const double d0 = std::abs(y.a[0]);
        for (int k = 0; k <= n; ++k) {
            cplx s = x.a[k];
            double e = x.err[k];
            bool f = x.flagged[k];
            for (int j = 1; j <= k; ++j) {
                s -= y.a[j] * q.a[k - j];
                e += y.err[j] * std::abs(q.a[k - j]) + std::abs(y.a[j]) * q.err[k - j];
                f = f || y.flagged[j] || q.flagged[k - j];
            }
            q.a[k] = s / y.a[0];
            q.err[k] = (e + y.err[0] * std::abs(q.a[k])) / d0;
            q.flagged[k] = f || y.flagged[0];
        }
        return q;
    }
};

struct HtSeries {
    TruncatedSeries numerator, denominator, rho;
};

namespace detail {

/// E_free[U_Lambda(eta + F)^n] for a trigonometric density, as an integral over
/// Lambda^n times atom sums: each product of (1 - e^{i alpha t}) factors is
/// expanded over subsets S, whose Poisson average is exp(int_Lambda psi(sum_S alpha_k G(x_k - y)) dy).
class PowerMomentIntegrand {
public:
    PowerMomentIntegrand(const MarkedConfiguration& eta, const GcmcParams& p, int n)
        : eta_(eta), p_(p), kernel_(p.kernel), n_(n),
          grid_(p.region, p.panel > 0 ? p.panel : default_panel(p.kernel), p.order), dense_(grid_.size(), 0.0) {
        const auto& nu = p.density.nu.atoms();
        tuples_ = 1;
        for (int k = 0; k < n; ++k) tuples_ *= nu.size();
    }

    cplx operator()(const std::vector<double>& u) {
        const int dim = p_.region.dim;
        std::vector<Point> x(n_);
        std::vector<double> xe(n_);
        const Region* metric = p_.region.periodic() ? &p_.region : nullptr;
        for (int k = 0; k < n_; ++k) {
            x[k] = {0.0, 0.0, 0.0};
            for (int i = 0; i < dim; ++i) x[k][i] = p_.region.lo[i] + u[k * dim + i] * p_.region.length(i);
            xe[k] = eta_.empty() ? 0.0 : field_sum(eta_, kernel_, x[k], metric);
        }
        const auto& nu = p_.density.nu.atoms();
        std::vector<std::size_t> idx(n_);
        std::vector<double> al(n_);
        cplx total{};
        for (std::size_t t = 0; t < tuples_; ++t) {
            std::size_t rem = t;
            cplx w{1.0, 0.0};
            for (int k = 0; k < n_; ++k) {
                idx[k] = rem % nu.size();
                rem /= nu.size();
                al[k] = nu[idx[k]].alpha;
                w *= nu[idx[k]].w;
            }
            cplx inner{};
            for (unsigned S = 0; S < (1u << n_); ++S) {
                double phase = 0.0;
                int bits = 0;
                for (int k = 0; k < n_; ++k)
                    if (S >> k & 1u) {
                        phase += al[k] * xe[k];
                        ++bits;
                    }
                const cplx term = std::polar(1.0, phase) * std::exp(log_poisson_average(x, al, S));
                inner += bits % 2 ? -term : term;
            }
            total += w * inner;
        }
        return total * std::pow(p_.region.volume(), n_);
    }

private:
    cplx log_poisson_average(const std::vector<Point>& x, const std::vector<double>& al, unsigned S) {
        if (S == 0) return {0.0, 0.0};
        const double rt = kernel_.truncation();
        for (int k = 0; k < n_; ++k)
            if (S >> k & 1u)
                grid_.for_each_near(x[k], rt, [&](std::size_t i, double r) {
                    if (dense_[i] == 0.0) touched_.push_back(i);
                    dense_[i] += al[k] * kernel_(r);
                    if (dense_[i] == 0.0) dense_[i] = 1e-300;
                });
        cplx s{};
        for (std::size_t i : touched_) {
            s += grid_.weight(i) * levy_psi(p_.charges, p_.z, dense_[i]);
            dense_[i] = 0.0;
        }
        touched_.clear();
        return s;
    }

    static double field_sum(const MarkedConfiguration& c, const Kernel& k, const Point& x, const Region* metric) {
        return detail::field_sum(c, k, x, metric);
    }

    const MarkedConfiguration& eta_;
    const GcmcParams& p_;
    Kernel kernel_;
    int n_;
    NodeGrid grid_;
    std::vector<double> dense_;
    std::vector<std::size_t> touched_;
    std::size_t tuples_ = 1;
};

/// Tensor Gauss-Legendre rule over Lambda^n at `order` points per panel and axis.
template <class F>
cplx product_rule(F& f, const GcmcParams& p, int n, int order) {
    const int dim = p.region.dim, m = n * dim;
    const double panel = p.panel > 0 ? p.panel : default_panel(p.kernel);
    const GaussRule& g = gauss_legendre(order);
    std::vector<std::vector<double>> u(dim), w(dim);
    for (int i = 0; i < dim; ++i) {
        const int np = std::max(1, static_cast<int>(std::ceil(p.region.length(i) / panel - 1e-9)));
        const double h = 1.0 / np;
        for (int q = 0; q < np; ++q)
            for (int k = 0; k < order; ++k) {
                u[i].push_back((q + 0.5 * (g.x[k] + 1.0)) * h);
                w[i].push_back(0.5 * h * g.w[k]);
            }
    }
    std::vector<std::size_t> idx(m, 0);
    std::vector<double> x(m);
    cplx total{};
    for (;;) {
        double wt = 1.0;
        for (int j = 0; j < m; ++j) {
            x[j] = u[j % dim][idx[j]];
            wt *= w[j % dim][idx[j]];
        }
        total += wt * f(x);
        int j = 0;
        while (j < m && ++idx[j] == u[j % dim].size()) idx[j++] = 0;
        if (j == m) break;
    }
    return total;
}

inline std::size_t product_rule_size(const GcmcParams& p, int n, int order) {
    const double panel = p.panel > 0 ? p.panel : default_panel(p.kernel);
    double total = 1.0;
    for (int i = 0; i < p.region.dim; ++i)
        total *= std::max(1.0, std::ceil(p.region.length(i) / panel - 1e-9)) * order;
    return static_cast<std::size_t>(std::pow(total, n));
}

inline TruncatedSeries free_exponential_series(const MarkedConfiguration& eta, const GcmcParams& p, int order,
                                               std::size_t points, int replicates, double tolerance) {
    TruncatedSeries s(order);
    s.a[0] = 1.0;
    double fact = 1.0;
    for (int n = 1; n <= order; ++n) {
        fact *= n;
        PowerMomentIntegrand f(eta, p, n);
        cplx mean;
        double err;
        if (product_rule_size(p, n, p.order + 2) <= (1u << 16)) {
            // deterministic; error from the difference of two rule orders
            mean = product_rule(f, p, n, p.order + 2);
            err = std::abs(mean - product_rule(f, p, n, p.order));
        } else {
            RngStream rng(p.seed, p.chain, 100 + n);
            auto r = qmc_integrate<cplx>(n * p.region.dim, points, replicates, f, [&] { return rng.uniform(); });
            mean = r.mean;
            err = r.stderr;
        }
        const double sign = n % 2 ? -1.0 : 1.0;
        s.a[n] = sign / fact * mean;
        s.err[n] = err / fact;
        s.flagged[n] = err > tolerance * std::max(1.0, std::abs(mean));
    }
    return s;
}

}  // namespace detail

/// High-temperature expansion of rho_Lambda(eta) in beta: numerator
/// E_free[e^{-beta U(eta + F)}], denominator the same at eta = 0, and their quotient.
inline HtSeries ht_series_rho(const MarkedConfiguration& eta, const GcmcParams& p, int order,
                              std::size_t qmc_points = 1u << 14, int replicates = 16, double tolerance = 1e-2) {
    p.validate();
    if (order > 3) throw ParameterError("series order above 3 is not supported");
    if (p.density.kind != DensityKind::trigonometric) throw ParameterError("series needs a trigonometric density");
    require_inside(eta, p.region);
    HtSeries h;
    h.numerator = detail::free_exponential_series(eta, p, order, qmc_points, replicates, tolerance);
    h.denominator = detail::free_exponential_series(MarkedConfiguration(p.region.dim), p, order, qmc_points, replicates,
                                                    tolerance);
    h.rho = h.numerator / h.denominator;
    return h;
}

// ---------------------------------------------------------------------------
// Two-component projection: e^{-beta U_Lambda(eta)} = E[e^{i <eta, G * gamma>}]
// with gamma Poisson of intensity beta on Lambda and marks distributed by nu.

struct PottsReport {
    double lhs = 1.0;
    cplx rhs{1.0, 0.0};
    double stderr = 0.0;
    double z_score = 0.0;
    std::size_t samples = 0;
};

inline PottsReport potts_projection_check(const MarkedConfiguration& eta, double beta, const InteractionMeasure& nu,
                                          const Kernel& kernel, const Region& region, std::size_t samples,
                                          RngStream& rng, const QuadSettings& qs = {}) {
    PottsReport rep;
    const EnergyDensity v = EnergyDensity::trigonometric(nu);
    const auto U = potential_U(eta, kernel, v, qs, &region);
    rep.lhs = std::exp(-beta * U.value);
    if (!nu.is_probability()) {
        rep.rhs = rep.lhs;
        return rep;
    }
    const ChargeDistribution marks = nu.as_charges();
    const Region* metric = region.periodic() ? &region : nullptr;
    std::vector<cplx> vals;
    vals.reserve(samples);
    for (std::size_t n = 0; n < samples; ++n) {
        const MarkedConfiguration g = sample_free(region, beta, marks, rng);
        double phase = 0.0;
        for (const auto& q : g.particles()) phase += q.s * eval_field_at(eta, kernel, q.x, metric);
        vals.push_back(std::polar(1.0, phase));
    }
    const EstimatorResult e = batch_means(vals);
    rep.rhs = e.mean;
    rep.stderr = e.stderr();
    rep.samples = samples;
    rep.z_score = z_score(rep.rhs, rep.stderr, rep.lhs, 0.0);
    return rep;
}

/// exp(-beta int int (1 - e^{i alpha s G(y)}) dnu dy) over the whole truncation ball.
inline double potts_one_point(double s, double beta, const InteractionMeasure& nu, const Kernel& k) {
    const auto& spec = k.spec();
    const double jump = spec.variant == KernelVariant::indicator_ball ? spec.radius : 0.0;
    const double u = detail::radial_integral([&](double r) { return nu.density(s * k(r)); }, k.truncation(), spec.dim, jump);
    return std::exp(-beta * u);
}

// ---------------------------------------------------------------------------
// Moments from correlation functionals:
// E[prod_p <F, f_p>] = sum over set partitions {I_1..I_j} of
//   z^j int prod_q s_q^{|I_q|} prod_{p in I_q} f_p(y_q) rho(sum_q s_q delta_{y_q}) dy dr.

using Partition = std::vector<std::vector<int>>;

inline std::vector<Partition> set_partitions(int l) {
    std::vector<Partition> out;
    if (l == 0) {
        out.push_back({});
        return out;
    }
    for (const auto& p : set_partitions(l - 1)) {
        for (std::size_t b = 0; b < p.size(); ++b) {
            Partition q = p;
            q[b].push_back(l - 1);
            out.push_back(q);
        }
        Partition q = p;
        q.push_back({l - 1});
        out.push_back(q);
    }
    return out;
}

/// Generic form: `block_integral(partition)` returns int prod_q (...) rho dy dr.
template <class BlockIntegral>
cplx moments_from_rho(int l, double z, BlockIntegral&& block_integral) {
    cplx total{};
    for (const auto& part : set_partitions(l)) total += std::pow(z, static_cast<double>(part.size())) * block_integral(part);
    return total;
}

/// Free (beta = 0) moments: rho = 1 so every partition term factorises per block.
inline double moments_free(const std::vector<TestProfile>& f, const ChargeDistribution& r, double z,
                           const Region& region, const QuadSettings& qs = {}) {
    auto block = [&](const Partition& part) {
        cplx prod{1.0, 0.0};
        for (const auto& I : part) {
            auto g = [&](const Point& x) {
                double v = 1.0;
                for (int p : I) v *= f[p](x);
                return v;
            };
            const auto res = integrate_box<double>(g, region, qs);
            prod *= res.value * r.moment(static_cast<int>(I.size()));
        }
        return prod;
    };
    return moments_from_rho(static_cast<int>(f.size()), z, block).real();
}

/// Interacting moments with rho evaluated by Widom insertion along one Gibbs
/// chain: each sample draws one uniform insertion per partition.
inline EstimatorResult moments_from_rho_mc(const std::vector<TestProfile>& f, const GcmcParams& p,
                                           std::size_t n_samples) {
    require_inside(MarkedConfiguration(p.region.dim), p.region);
    GcmcChain chain(p);
    RngStream draw(p.seed, p.chain, 2);
    const auto parts = set_partitions(static_cast<int>(f.size()));
    const double vol = p.region.volume();
    std::vector<double> totals;
    totals.reserve(n_samples);
    run(chain, n_samples, [&](const GcmcChain& c, std::size_t) {
        double total = 0.0;
        for (const auto& part : parts) {
            MarkedConfiguration eta(p.region.dim);
            double g = 1.0;
            for (const auto& I : part) {
                Particle q;
                for (int i = 0; i < p.region.dim; ++i) q.x[i] = draw.uniform(p.region.lo[i], p.region.hi[i]);
                q.s = p.charges.sample(draw);
                g *= std::pow(q.s, static_cast<double>(I.size()));
                for (int k : I) g *= f[k](q.x);
                eta.add(q);
            }
            const double j = static_cast<double>(part.size());
            double weight = 1.0;
            if (p.beta != 0.0 && g != 0.0) {
                InsertionProbe probe(c, eta);
                weight = boltzmann(p.beta, probe.u_eta()) * boltzmann(p.beta, probe.mutual());
            }
            total += std::pow(p.z * vol, j) * g * weight;
        }
        totals.push_back(total);
    });
    return batch_means(totals);
}

}  // namespace cpn
