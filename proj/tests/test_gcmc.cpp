#include <catch_amalgamated.hpp>

#include "cpn/gcmc.hpp"

using namespace cpn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Every indicator ball of radius R >= L covers [0, L], so the field on the
// region is the total charge S and U = L v(S). For Rademacher charges the
// grand-canonical weight of (n, k positive charges) is
// (z L)^n / n! * C(n, k) 2^{-n} * exp(-beta L v(2k - n)).
struct ConstantFieldModel {
    double z, beta, L, b;
    int n_max = 80;

    [[nodiscard]] double v(double s) const { return 1.0 - std::cos(b * s); }

    template <class F>
    double average(F&& f) const {
        double num = 0.0, den = 0.0;
        for (int n = 0; n <= n_max; ++n) {
            const double base = n * std::log(z * L) - std::lgamma(n + 1.0) - n * std::log(2.0);
            for (int k = 0; k <= n; ++k) {
                const double w = std::exp(base + std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                                          std::lgamma(n - k + 1.0) - beta * L * v(2.0 * k - n));
                num += w * f(n, 2 * k - n);
                den += w;
            }
        }
        return num / den;
    }
};

GcmcParams constant_field_params(const ConstantFieldModel& m) {
    GcmcParams p;
    p.z = m.z;
    p.beta = m.beta;
    p.region = Region::box(1, 0.0, m.L);
    p.kernel = KernelSpec::indicator(1.5 * m.L, 1);
    p.density = EnergyDensity::trigonometric(InteractionMeasure::rademacher(m.b));
    p.charges = ChargeDistribution::rademacher(1.0);
    p.displacement = 0.3;
    p.burn_in = 2000;
    p.thinning = 10;
    p.seed = 17;
    return p;
}

}  // namespace

TEST_CASE("non-interacting chain samples the Poisson law", "[gcmc]") {
    GcmcParams p;
    p.z = 6.0;
    p.beta = 0.0;
    p.region = Region::box(1, 0.0, 2.0);
    p.kernel = KernelSpec::indicator(0.2, 1);
    p.seed = 3;
    GcmcChain chain(p);
    std::vector<double> ns;
    const auto s = run(chain, 20000, [&](const GcmcChain& c, std::size_t) { ns.push_back(c.config().size()); });
    const double mu = p.z * p.region.volume();
    CHECK(std::abs(s.mean_n.real() - mu) < 4.0 * s.mean_n.stderr());
    double var = 0.0;
    for (double n : ns) var += (n - s.mean_n.real()) * (n - s.mean_n.real());
    var /= static_cast<double>(ns.size() - 1);
    CHECK_THAT(var, WithinRel(mu, 0.1));
}

TEST_CASE("hard rods reproduce the exact occupation law", "[gcmc]") {
    // P(N = n) proportional to z^n / n! (L - (n - 1) 2R)_+^n
    const double L = 1.0, R = 0.05, z = 8.0;
    std::vector<double> w;
    for (int n = 0;; ++n) {
        const double free_len = L - (n - 1) * 2.0 * R;
        if (n > 0 && free_len <= 0.0) break;
        w.push_back(std::exp(n * std::log(z) - std::lgamma(n + 1.0) + (n > 0 ? n * std::log(free_len) : 0.0)));
    }
    double tot = 0.0, mean = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) {
        tot += w[n];
        mean += n * w[n];
    }
    mean /= tot;

    GcmcParams p;
    p.z = z;
    p.beta = 1.0;
    p.region = Region::box(1, 0.0, L);
    p.kernel = KernelSpec::indicator(R, 1);
    p.density = EnergyDensity::hard_core(2);
    p.charges = ChargeDistribution({{1.0, 1.0}});
    p.displacement = 0.05;
    p.burn_in = 5000;
    p.thinning = 20;
    p.seed = 5;
    GcmcChain chain(p);
    const auto s = run(chain, 20000, [&](const GcmcChain& c, std::size_t) {
        CHECK(c.energy() == 0.0);
    });
    INFO("exact " << mean << " chain " << s.mean_n.real() << " +- " << s.mean_n.stderr());
    CHECK(std::abs(s.mean_n.real() - mean) < 4.0 * s.mean_n.stderr());
    CHECK(chain.config().min_pair_distance() >= 2.0 * R);
}

TEST_CASE("birth acceptance from a single rod", "[gcmc]") {
    // acceptance = (1 - excluded fraction) * min(1, z L (p_d / p_b) / 2)
    const double L = 1.0, R = 0.1, z = 1.2;
    GcmcParams p;
    p.z = z;
    p.beta = 1.0;
    p.region = Region::box(1, 0.0, L);
    p.kernel = KernelSpec::indicator(R, 1);
    p.density = EnergyDensity::hard_core(2);
    p.charges = ChargeDistribution({{1.0, 1.0}});
    p.w_birth = 0.5;
    p.w_death = 0.25;
    p.w_displace = 0.25;
    MarkedConfiguration one(1);
    one.add({0.5, 0.0, 0.0}, 1.0);
    GcmcChain chain(p);
    double acc = 0.0, count = 0.0;
    for (int i = 0; i < 40000; ++i) {
        chain.set_config(one);
        const auto info = chain.step();
        if (info.type != MoveType::birth) continue;
        acc += info.accepted;
        count += 1.0;
    }
    const double expected = (1.0 - 4.0 * R / L) * std::min(1.0, z * L * (0.25 / 0.5) / 2.0);
    const double se = std::sqrt(expected * (1.0 - expected) / count);
    CHECK(std::abs(acc / count - expected) < 4.0 * se);
}

TEST_CASE("interacting chain matches the constant-field model", "[gcmc]") {
    const ConstantFieldModel m{3.0, 1.0, 1.0, 1.0};
    const double exact_n = m.average([](int n, int) { return static_cast<double>(n); });
    const double exact_u = m.average([&](int, int s) { return m.L * m.v(s); });
    GcmcChain chain(constant_field_params(m));
    const auto s = run(chain, 30000);
    INFO("exact <N> " << exact_n << " chain " << s.mean_n.real() << " +- " << s.mean_n.stderr());
    CHECK(std::abs(s.mean_n.real() - exact_n) < 4.0 * s.mean_n.stderr());
    CHECK(std::abs(s.mean_u.real() - exact_u) < 4.0 * s.mean_u.stderr() + 1e-9);
    // the interaction suppresses particle number relative to the free value z L
    CHECK(exact_n < m.z * m.L);
    CHECK(chain.resync() < 1e-9);
}

TEST_CASE("cached energy stays consistent with a fresh evaluation", "[gcmc]") {
    GcmcParams p;
    p.z = 20.0;
    p.beta = 0.5;
    p.region = Region::box(2, 0.0, 1.0, Boundary::periodic);
    p.kernel = KernelSpec::bessel(0.5, 8.0, 2);
    p.kernel.truncation_radius = 0.3;
    p.density = EnergyDensity::trigonometric(InteractionMeasure::rademacher(0.8));
    p.charges = ChargeDistribution::uniform(1.0, 4);
    p.resync_interval = 0;
    p.order = 3;
    GcmcChain chain(p);
    for (int i = 0; i < 3000; ++i) chain.step();
    const double cached = chain.energy();
    CHECK_THAT(chain.energy_of(chain.config()), WithinAbs(cached, 1e-8 * std::max(1.0, std::abs(cached))));
    CHECK(chain.resync() < 1e-8 * std::max(1.0, std::abs(cached)));
}

TEST_CASE("pair-sum chain tracks the quadratic energy", "[gcmc]") {
    GcmcParams p;
    p.z = 10.0;
    p.beta = 0.3;
    p.region = Region::box(1, 0.0, 1.0);
    p.kernel = KernelSpec::bessel(0.4, 2.0, 1);
    p.density = EnergyDensity::quadratic_renormalized();
    p.resync_interval = 0;
    GcmcChain chain(p);
    for (int i = 0; i < 2000; ++i) chain.step();
    const double fresh = quadratic_renormalized_U(chain.config(), PairPotential(p.kernel)).value;
    CHECK_THAT(chain.energy(), WithinAbs(fresh, 1e-9 * std::max(1.0, std::abs(fresh))));
}

TEST_CASE("Widom insertion estimate of the correlation function", "[gcmc]") {
    const ConstantFieldModel m{2.0, 0.7, 1.0, 1.0};
    MarkedConfiguration eta(1);
    eta.add({0.3, 0.0, 0.0}, 1.0);
    eta.add({0.6, 0.0, 0.0}, 1.0);
    // rho(eta) = e^{-beta U(eta)} < e^{-beta W} > with W = L [v(2 + S) - v(2) - v(S)]
    const double exact = std::exp(-m.beta * m.L * m.v(2.0)) *
                         m.average([&](int, int s) { return std::exp(-m.beta * m.L * (m.v(2.0 + s) - m.v(2.0) - m.v(s))); });
    const auto est = estimate_rho(eta, constant_field_params(m), 20000);
    INFO("exact " << exact << " estimate " << est.result.mean.real() << " +- " << est.result.stderr());
    CHECK(std::abs(est.result.mean.real() - exact) < 4.0 * est.result.stderr());
    CHECK(est.ruelle_ok);
    CHECK(std::abs(exact) <= est.ruelle_bound);

    auto free_p = constant_field_params(m);
    free_p.beta = 0.0;
    CHECK(estimate_rho(eta, free_p, 100).result.mean == cplx(1.0));

    MarkedConfiguration outside(1);
    outside.add({1.5, 0.0, 0.0}, 1.0);
    CHECK_THROWS_AS(estimate_rho(outside, free_p, 10), std::domain_error);
}

TEST_CASE("reweighted characteristic functional reduces to the free one at beta = 0", "[gcmc]") {
    GcmcParams p;
    p.z = 4.0;
    p.beta = 0.0;
    p.region = Region::box(1, 0.0, 1.0);
    p.kernel = KernelSpec::indicator(0.2, 1);
    p.charges = ChargeDistribution::rademacher(1.0);
    MarkedConfiguration eta(1);
    eta.add({0.5, 0.0, 0.0}, 0.9);
    const double exact = std::exp(0.4 * levy_psi(p.charges, p.z, 0.9).real());
    const auto est = estimate_char_functional(eta, p, 20000);
    CHECK(std::abs(est.mean.real() - exact) < 4.0 * est.stderr());
    CHECK(est.reliable());
}

TEST_CASE("Gibbs moments of the free field", "[gcmc]") {
    // E<F,f> = z E[s] int f, E<F,f><F,g> = z E[s^2] int f g + z^2 E[s]^2 int f int g
    GcmcParams p;
    p.z = 15.0;
    p.beta = 0.0;
    p.region = Region::box(1, 0.0, 1.0);
    p.kernel = KernelSpec::indicator(0.1, 1);
    p.charges = ChargeDistribution({{1.0, 0.5}, {2.0, 0.5}});
    p.burn_in = 500;
    p.thinning = 20;
    p.seed = 8;
    const double w = 0.05, h = 1.0;
    const auto f = TestProfile::gaussian(1, {0.5, 0.0, 0.0}, w, h);
    const double int_f = h * w * std::sqrt(2.0 * std::numbers::pi), int_ff = h * h * w * std::sqrt(std::numbers::pi);
    const double m1 = p.z * 1.5 * int_f, m2 = p.z * 2.5 * int_ff + p.z * p.z * 2.25 * int_f * int_f;
    const auto est = estimate_moments({f, f}, p, 20000);
    REQUIRE(est.size() == 2);
    CHECK(std::abs(est[0].mean.real() - m1) < 4.0 * est[0].stderr());
    CHECK(std::abs(est[1].mean.real() - m2) < 4.0 * est[1].stderr());
}

TEST_CASE("invalid chain parameters are rejected", "[gcmc]") {
    GcmcParams p;
    p.z = -1.0;
    CHECK_THROWS_AS(GcmcChain(p), ParameterError);
    p.z = 1.0;
    p.kernel = KernelSpec::indicator(0.1, 2);
    CHECK_THROWS_AS(GcmcChain(p), ParameterError);
    p.kernel = KernelSpec::indicator(0.1, 1);
    p.thinning = 0;
    CHECK_THROWS_AS(GcmcChain(p), ParameterError);
}

TEST_CASE("chains are reproducible from their seed", "[gcmc]") {
    GcmcParams p;
    p.z = 5.0;
    p.beta = 0.5;
    p.seed = 99;
    GcmcChain a(p), b(p);
    for (int i = 0; i < 500; ++i) {
        a.step();
        b.step();
    }
    REQUIRE(a.config().size() == b.config().size());
    for (std::size_t i = 0; i < a.config().size(); ++i) CHECK(a.config()[i].x == b.config()[i].x);
    p.chain = 1;
    GcmcChain c(p);
    for (int i = 0; i < 500; ++i) c.step();
    CHECK(c.energy() != a.energy());
}
