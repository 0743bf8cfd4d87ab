#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "cpn/config.hpp"

using namespace cpn;

namespace {

std::string read_file(const std::string& name) {
    std::ifstream in(std::string(CPN_CONFIG_DIR) + "/" + name);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<ConfigIssue> issues_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

}  // namespace

TEST_CASE("defaults parse from an empty file", "[config]") {
    const auto c = parse_config("");
    CHECK(c.seed == 0);
    CHECK(c.kernel == KernelSpec::bessel(0.5, 1.0, 2));
    CHECK(c.region == Region::box(2, 0.0, 1.0));
    CHECK(c.sampler.domain == "cutoff");
    CHECK(c.schedule.z == std::vector<double>{1.0, 10.0, 100.0, 1000.0});
}

TEST_CASE("shipped configurations parse and round trip", "[config]") {
    for (const char* name : {"free_1d.ini", "fig1.ini", "duality_1d.ini", "sg.ini"}) {
        INFO(name);
        const auto c = parse_config(read_file(name));
        CHECK(parse_config(serialize(c)) == c);
        CHECK(serialize(parse_config(serialize(c))) == serialize(c));
    }
    const auto sg = parse_config(read_file("sg.ini"));
    REQUIRE(sg.estimator.probe.size() == 2);
    CHECK(sg.estimator.probe[1].x[1] == 0.6);
    CHECK(sg.estimator.probe[1].s == -1.0);
    CHECK(sg.kernel.tail_tolerance == 1e-8);
}

TEST_CASE("every field survives serialisation", "[config]") {
    ExperimentConfig c;
    c.seed = 123456789012345ULL;
    c.output = "runs/x";
    c.kernel = KernelSpec::uv_regularized(KernelSpec::bessel(0.3, 2.5, 3), 0.1);
    c.kernel.truncation_radius = 4.0;
    c.charges.law = "atoms";
    c.charges.atoms = {{-1.0, 0.25}, {0.5, 0.75}};
    c.interaction.kind = "trigonometric";
    c.interaction.law = "atoms";
    c.interaction.atoms = {{-0.3, 0.5}, {0.3, 0.5}};
    c.interaction.mode = "band";
    c.region = Region{3, {-1.0, 0.0, 0.5}, {1.0, 2.0, 1.5}, Boundary::periodic};
    c.sampler.z = 0.1 + 0.2;
    c.sampler.beta = 1.0 / 3.0;
    c.sampler.domain = "whole_space";
    c.sampler.panel = 0.5;
    c.estimator.probe = {{{0.1, 0.2, 0.7}, -0.5}};
    c.estimator.qmc_points = 1000;
    c.schedule.z = {2.0, 20.0};
    c.schedule.lambda = 0.7;
    const auto back = parse_config(serialize(c));
    CHECK(back == c);
    CHECK(back.gcmc_params().domain == EnergyDomain::whole_space);
    CHECK(back.probe().size() == 1);
}

TEST_CASE("all problems are reported with line and field", "[config]") {
    const std::string text =
        "seed = -3\n"          // 1
        "[kernel]\n"           // 2
        "variant = gaussian\n" // 3
        "m0 = fast\n"          // 4
        "[region]\n"           // 5
        "dim = 3\n"            // 6
        "[sampler]\n"          // 7
        "beta = -1\n"          // 8
        "beta = 2\n"           // 9
        "colour = red\n"       // 10
        "[extras]\n";          // 11
    const auto issues = issues_of(text);
    auto has = [&](int line, const std::string& field) {
        for (const auto& i : issues)
            if (i.line == line && i.field == field) return true;
        return false;
    };
    CHECK(has(1, "seed"));
    CHECK(has(3, "kernel.variant"));
    CHECK(has(4, "kernel.m0"));
    CHECK(has(6, "region.dim"));
    CHECK(has(8, "sampler.beta"));
    CHECK(has(9, "sampler.beta"));
    CHECK(has(10, "sampler.colour"));
    CHECK(has(11, "extras"));
    for (std::size_t i = 1; i < issues.size(); ++i) CHECK(issues[i - 1].line <= issues[i].line);
    CHECK(issues[0].str().rfind("line 1: seed: ", 0) == 0);
}

TEST_CASE("kernel validation errors point at the offending field", "[config]") {
    const auto issues = issues_of("[kernel]\nalpha = 1.5\n");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].line == 2);
    CHECK(issues[0].field == "kernel.alpha");
}

TEST_CASE("malformed lists, atoms and probes are rejected", "[config]") {
    CHECK(issues_of("[schedule]\nz = 1, x\n").size() == 1);
    CHECK(issues_of("[schedule]\nz = 10, 1\n").size() == 1);
    CHECK(issues_of("[charges]\nlaw = atoms\natoms = 1:0.5, -1\n").size() >= 1);
    CHECK(issues_of("[charges]\nlaw = atoms\n").size() >= 1);
    CHECK(issues_of("[estimator]\nprobe = 0.5 : 1\n").size() == 1);
    CHECK(issues_of("[estimator]\nprobe = 2, 0.5 : 1\n").size() == 1);
    CHECK(issues_of("[kernel\n").size() == 1);
    CHECK(issues_of("just words\n").size() == 1);
    CHECK(issues_of("[sampler]\npanel = 5\n").size() == 1);
}
