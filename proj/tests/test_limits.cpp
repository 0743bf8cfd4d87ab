#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>

#include "cpn/limits.hpp"

using namespace cpn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("scaled exponent of the Rademacher law", "[limits]") {
    const auto r = ChargeDistribution::rademacher();
    for (double z : {1.0, 7.0, 1e4})
        for (double t : {0.1, 1.0, 2.0})
            CHECK_THAT(psi_scaled(r, z, t).real(), WithinRel(-2.0 * z * std::pow(std::sin(0.5 * t / std::sqrt(z)), 2), 1e-12));
    CHECK_THROWS_AS(psi_scaled(r, 0.0, 1.0), ParameterError);
}

TEST_CASE("scaled exponent approaches the Gaussian exponent at rate 1/z", "[limits]") {
    ScalingSchedule s;
    s.r = ChargeDistribution::uniform(1.0, 6);
    const auto rows = psi_limit_table(s);
    REQUIRE(rows.size() == 4);
    // leading correction is m4 t^4 / (24 z) at t = 2
    const double m4 = s.r.moment(4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        INFO("z=" << rows[i].z);
        CHECK_THAT(rows[i].max_error * rows[i].z, WithinRel(16.0 * m4 / 24.0, 0.2 / rows[i].z));
    }
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].max_error < rows[i - 1].max_error);

    ScalingSchedule bad;
    bad.z = {10.0, 1.0};
    CHECK_THROWS_AS(psi_limit_table(bad), ParameterError);
}

TEST_CASE("probe energy is the pair-potential quadratic form", "[limits]") {
    const auto spec = KernelSpec::bessel(0.5, 1.5, 1);
    const PairPotential phi(spec);
    MarkedConfiguration probe(1);
    probe.add({0.0, 0.0, 0.0}, 0.7);
    probe.add({0.4, 0.0, 0.0}, -1.2);
    const double expected = (0.49 + 1.44) * phi(0.0) - 2.0 * 0.84 * phi(0.4);
    CHECK_THAT(probe_energy(probe, phi), WithinRel(expected, 1e-12));

    MarkedConfiguration p2(2);
    p2.add({0.0, 0.0, 0.0}, 1.0);
    CHECK(std::isinf(probe_energy(p2, PairPotential(KernelSpec::bessel(0.5, 1.0, 2)))));
}

TEST_CASE("characteristic functional of a scaled indicator field tends to the Gaussian", "[limits]") {
    const double R = 0.2;
    const auto spec = KernelSpec::indicator(R, 1);
    const Kernel k(spec);
    MarkedConfiguration probe(1);
    probe.add({0.5, 0.0, 0.0}, 1.0);
    ScalingSchedule s;
    QuadSettings qs;
    qs.rel_tol = 1e-10;
    const auto rep = gaussian_limit_report(s, k, probe, qs);
    const double g = k(0.5 * R);
    CHECK_THAT(rep.rows[0].gaussian, WithinRel(std::exp(-0.5 * 2.0 * R * g * g), 1e-12));
    for (const auto& row : rep.rows) {
        INFO("z=" << row.z);
        const double exact = std::exp(2.0 * R * row.z * (std::cos(g / std::sqrt(row.z)) - 1.0));
        CHECK_THAT(row.cpn.real(), WithinRel(exact, 1e-8));
        CHECK_THAT(row.cpn.imag(), WithinAbs(0.0, 1e-12));
    }
    CHECK(rep.monotone(0));
    CHECK(rep.sigma_sq_alt == 2.0 * rep.sigma_sq);
}

TEST_CASE("scaling identity holds for a Gaussian profile", "[limits]") {
    const auto r = ChargeDistribution({{-0.5, 0.25}, {1.0, 0.75}});
    for (int d : {1, 2}) {
        const auto f = TestProfile::gaussian(d, {0.3, -0.2, 0.0}, 0.3, 1.4);
        for (double lambda : {0.5, 3.0}) {
            const auto rep = scaling_identity_check(r, lambda, f);
            INFO("d=" << d << " lambda=" << lambda);
            CHECK(rep.rel_error < 1e-9);
            CHECK(std::abs(rep.rhs) > 0.0);
        }
    }
    CHECK_THROWS_AS(scaling_identity_check(r, 0.0, TestProfile::gaussian(1, {}, 1.0, 1.0)), ParameterError);
}

TEST_CASE("pair distance density integrates to the squared volume", "[limits]") {
    const Region seg = Region::box(1, 0.0, 1.7);
    CHECK_THAT(integrate_1d([&](double D) { return detail::pair_distance_density(seg, D); }, 0.0, 1.7, 1e-12).value,
               WithinRel(1.7 * 1.7, 1e-10));
    const Region rect{2, {0.0, 0.0, 0.0}, {1.0, 0.6, 0.0}};
    const double dmax = std::hypot(1.0, 0.6);
    double total = 0.0;
    for (auto [a, b] : {std::pair{0.0, 0.6}, std::pair{0.6, 1.0}, std::pair{1.0, dmax}})
        total += integrate_1d([&](double D) { return detail::pair_distance_density(rect, D); }, a, b, 1e-11).value;
    CHECK_THAT(total, WithinRel(0.36, 1e-8));
    // mean squared distance of two uniform points: (L1^2 + L2^2) / 6 per pair
    double m2 = 0.0;
    for (auto [a, b] : {std::pair{0.0, 0.6}, std::pair{0.6, 1.0}, std::pair{1.0, dmax}})
        m2 += integrate_1d([&](double D) { return D * D * detail::pair_distance_density(rect, D); }, a, b, 1e-11).value;
    CHECK_THAT(m2 / 0.36, WithinRel((1.0 + 0.36) / 6.0, 1e-8));
}

namespace {

// indicator kernel in d = 1: the two-centre exponent is a sum over the overlap and the two lunes
double indicator_l2(double z, double R, double g, double L, const ChargeDistribution& r, double b, bool limit) {
    auto psi = [&](double t) { return limit ? -0.5 * r.second_moment() * t * t : psi_scaled(r, z, t).real(); };
    auto h = [&](double D) {
        const double overlap = std::max(2.0 * R - D, 0.0), lune = std::min(D, 2.0 * R);
        double v = 0.0;
        for (double a1 : {-b, b})
            for (double a2 : {-b, b})
                v += 0.25 * std::exp(overlap * psi(g * (a1 + a2)) + lune * (psi(g * a1) + psi(g * a2)));
        return v;
    };
    auto f = [&](double D) { return 2.0 * (L - D) * h(D); };
    return integrate_1d(f, 0.0, 2.0 * R, 1e-12).value + integrate_1d(f, 2.0 * R, L, 1e-12).value;
}

}  // namespace

TEST_CASE("L2 norm of the trigonometric interaction for an indicator kernel", "[limits]") {
    // 2R sits on a node of the outer radial rule, where the integrand has a kink
    const double R = 0.5 * std::pow(10.0, -4.0 / 6.0), L = 1.0;
    const auto spec = KernelSpec::indicator(R, 1);
    const Kernel k(spec);
    const double g = k(0.5 * R);
    const auto r = ChargeDistribution::rademacher();
    const auto nu = InteractionMeasure::rademacher(1.3);
    const Region seg = Region::box(1, 0.0, L);
    QuadSettings qs;
    qs.rel_tol = 1e-10;
    qs.abs_tol = 1e-12;
    for (double z : {1.0, 20.0}) {
        const auto res = triviality_l2(z, nu, r, k, seg, qs);
        INFO("z=" << z);
        CHECK_FALSE(res.flagged);
        CHECK_THAT(res.value, WithinRel(indicator_l2(z, R, g, L, r, 1.3, false), 1e-6));
    }
    const auto plateau = triviality_plateau(nu, r, spec, seg);
    CHECK_THAT(plateau.value, WithinRel(indicator_l2(0.0, R, g, L, r, 1.3, true), 1e-6));
    CHECK_THAT(triviality_l2(1e6, nu, r, k, seg, qs).value, WithinRel(plateau.value, 1e-4));

    CHECK_THROWS_AS(triviality_l2(1.0, nu, ChargeDistribution({{1.0, 0.7}, {-1.0, 0.3}}), k, seg), ParameterError);
    CHECK(triviality_plateau(nu, r, KernelSpec::bessel(0.5, 1.0, 2), Region::box(2, 0.0, 1.0)).value == 0.0);
}

TEST_CASE("duality swaps activity with inverse temperature and charges with interaction", "[limits]") {
    DualityPairing p;
    p.z = 0.3;
    p.beta = 0.05;
    p.r = ChargeDistribution::rademacher(0.8);
    p.nu = InteractionMeasure::rademacher(1.2);
    const auto d = p.swapped();
    CHECK(d.z == p.beta);
    CHECK(d.beta == p.z);
    CHECK(d.r.atoms() == p.nu.as_charges().atoms());
    const auto dd = d.swapped();
    CHECK(dd.z == p.z);
    CHECK(dd.beta == p.beta);
    CHECK(dd.r.atoms() == p.r.atoms());
    CHECK(dd.nu == p.nu);

    GcmcParams base;
    base.seed = 99;
    const auto fwd = forward_params(p, base), dual = dual_params(p, base);
    CHECK(fwd.seed == 99);
    CHECK(fwd.domain == EnergyDomain::cutoff);
    CHECK(dual.domain == EnergyDomain::whole_space);
    CHECK(dual.z == p.beta);
    CHECK(dual.beta == p.z);
}

TEST_CASE("duality at beta = 0 reduces to the free characteristic functional", "[limits]") {
    DualityPairing p;
    p.z = 2.0;
    p.beta = 0.0;
    p.kernel = KernelSpec::indicator(0.1, 1);
    MarkedConfiguration eta(1);
    eta.add({0.3, 0.0, 0.0}, 1.0);
    eta.add({0.42, 0.0, 0.0}, -1.0);
    QuadSettings qs;
    qs.rel_tol = 1e-10;
    const auto c = duality_closed_form(eta, p, qs);
    CHECK(c.rel_error < 1e-8);
    // overlap 0.08 carries zero field; lunes of 0.12 each carry +-1
    CHECK_THAT(c.rhs, WithinRel(std::exp(2.0 * 0.24 * (std::cos(1.0) - 1.0)), 1e-8));
}

TEST_CASE("sine-Gordon weights", "[limits]") {
    SineGordonSetup s;
    s.m0 = 2.0;
    s.tail_tolerance = 1e-8;
    const SineGordon sg(s);

    MarkedConfiguration one(2);
    one.add({0.5, 0.5, 0.0}, 1.0);
    CHECK(sg.scaled(10.0, one) == 0.0);
    CHECK(sg.gaussian(one) == 0.0);

    // two charges without a source: sigma^2 s1 s2 G1(r) with G1 = K0(m r) / (2 pi)
    MarkedConfiguration two(2);
    two.add({0.4, 0.5, 0.0}, 1.0);
    two.add({0.6, 0.5, 0.0}, -1.0);
    const double g1 = boost::math::cyl_bessel_k(0, 2.0 * 0.2) / (2.0 * std::numbers::pi);
    CHECK_THAT(sg.gaussian(two), WithinRel(-g1, 1e-6));

    MarkedConfiguration same(2);
    same.add({0.4, 0.5, 0.0}, 1.0);
    same.add({0.4, 0.5, 0.0}, -1.0);
    CHECK_THROWS_AS(sg.gaussian(same), SingularConfiguration);

    CHECK_THAT(sg.series_coefficient(0, 0, SgWhich::gaussian, 1.0, 64, 4, 1).mean, WithinAbs(1.0, 1e-14));
    CHECK_THAT(sg.series_coefficient(1, 0, SgWhich::gaussian, 1.0, 64, 4, 1).mean, WithinAbs(-1.0, 1e-14));
    CHECK_THAT(sg.series_coefficient(2, 0, SgWhich::gaussian, 1.0, 64, 4, 1).mean, WithinAbs(0.5, 1e-14));
    CHECK_THROWS_AS(sg.series_coefficient(4, 0, SgWhich::gaussian, 1.0, 64, 4, 1), ParameterError);

    SineGordonSetup bad = s;
    bad.region = Region::box(1, 0.0, 1.0);
    CHECK_THROWS_AS(SineGordon(bad), ParameterError);
    bad = s;
    bad.nu = InteractionMeasure({{1.0, 0.3}, {-1.0, 0.3}});
    CHECK_THROWS_AS(SineGordon(bad), ParameterError);
}

TEST_CASE("sine-Gordon source energy matches the convolution of the sources", "[limits]") {
    SineGordonSetup s;
    s.tail_tolerance = 1e-8;
    s.f.push_back({{0.5, 0.5, 0.0}, 0.2, 1.0});
    const SineGordon sg(s);
    // a single charge at the bump centre: 2 s (G1 * f)(c) enters the Gaussian weight
    MarkedConfiguration one(2);
    one.add({0.5, 0.5, 0.0}, -1.0);
    CHECK_THAT(sg.gaussian(one), WithinRel(0.5 * (sg.source_energy() - 2.0 * sg.source1({0.5, 0.5, 0.0})), 1e-12));
    // source energy is int (G * f)^2 dx
    Region box = Region::box(2, -4.0, 5.0);
    QuadSettings qs;
    qs.rel_tol = 1e-7;
    const auto direct = integrate_box<double>([&](const Point& x) { return std::pow(sg.source(x), 2); }, box, qs);
    CHECK_THAT(direct.value, WithinRel(sg.source_energy(), 1e-4));
}
