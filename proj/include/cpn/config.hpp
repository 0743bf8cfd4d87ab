#pragma once

// Experiment configuration: flat key = value pairs grouped in [sections].
//
//   seed = 7
//   output = runs/demo
//   [kernel]
//   variant = bessel_alpha
//   alpha = 0.5
//
// Parsing reports every problem it finds, each with its line and field.

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/ensembles.hpp"
#include "cpn/fields.hpp"
#include "cpn/gcmc.hpp"
#include "cpn/kernels.hpp"
#include "cpn/potentials.hpp"

namespace cpn {

struct ConfigIssue {
    int line = 0;  ///< 0 when the field is missing altogether
    std::string field;
    std::string message;
    [[nodiscard]] std::string str() const {
        std::string s = line > 0 ? "line " + std::to_string(line) + ": " : "";
        return s + field + ": " + message;
    }
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
    [[nodiscard]] const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<ConfigIssue>& v) {
        std::string s;
        for (const auto& i : v) s += (s.empty() ? "" : "\n") + i.str();
        return s;
    }
    std::vector<ConfigIssue> issues_;
};

struct ChargesConfig {
    std::string law = "rademacher";  ///< rademacher | uniform | atoms
    double q = 1.0;                  ///< rademacher magnitude
    double c = 1.0;                  ///< uniform half-width
    int nodes = 32;
    std::vector<std::pair<double, double>> atoms;

    [[nodiscard]] ChargeDistribution build() const {
        if (law == "uniform") return ChargeDistribution::uniform(c, nodes);
        if (law == "atoms") {
            std::vector<ChargeDistribution::Atom> a;
            for (auto [s, w] : atoms) a.push_back({s, w});
            return ChargeDistribution(a);
        }
        return ChargeDistribution::rademacher(q);
    }
    bool operator==(const ChargesConfig&) const = default;
};

struct InteractionConfig {
    std::string kind = "trigonometric";  ///< trigonometric | threshold | hard_core | quadratic_renormalized
    std::string law = "rademacher";      ///< rademacher | atoms (trigonometric only)
    double b = 1.0;
    std::vector<std::pair<double, double>> atoms;
    double C = 1.0;
    std::string mode = "above";  ///< above | abs_above | band
    int l = 2;

    [[nodiscard]] InteractionMeasure measure() const {
        if (law == "atoms") {
            std::vector<InteractionMeasure::Atom> a;
            for (auto [al, w] : atoms) a.push_back({al, cplx{w, 0.0}});
            return InteractionMeasure(a);
        }
        return InteractionMeasure::rademacher(b);
    }
    [[nodiscard]] EnergyDensity build() const {
        if (kind == "threshold") {
            const ThresholdMode m = mode == "abs_above" ? ThresholdMode::abs_above
                                  : mode == "band"      ? ThresholdMode::band
                                                        : ThresholdMode::above;
            return EnergyDensity::threshold(C, m);
        }
        if (kind == "hard_core") return EnergyDensity::hard_core(l);
        if (kind == "quadratic_renormalized") return EnergyDensity::quadratic_renormalized();
        return EnergyDensity::trigonometric(measure());
    }
    bool operator==(const InteractionConfig&) const = default;
};

struct SamplerConfig {
    double z = 1.0;
    double beta = 0.0;
    std::size_t samples = 1000;
    std::size_t burn_in = 1000;
    std::size_t thinning = 10;
    double displacement = 0.1;
    double w_birth = 0.35, w_death = 0.35, w_displace = 0.30;
    std::string domain = "cutoff";  ///< cutoff | whole_space
    double panel = 0.0;
    int order = 6;
    bool operator==(const SamplerConfig&) const = default;
};

struct EstimatorConfig {
    std::vector<Particle> probe;  ///< eta
    int order = 2;                ///< series order
    std::size_t qmc_points = 1 << 14;
    int replicates = 16;
    double min_ess = 0.1;
    int raster = 256;     ///< cells per axis for field-raster
    double level = 1.0;   ///< threshold for field-raster statistics
    bool operator==(const EstimatorConfig&) const = default;
};

struct ScheduleConfig {
    std::vector<double> z{1.0, 10.0, 100.0, 1000.0};
    double t_max = 2.0;
    int t_points = 20;
    double lambda = 2.0;
    bool operator==(const ScheduleConfig&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output;
    KernelSpec kernel = KernelSpec::bessel(0.5, 1.0, 2);
    ChargesConfig charges;
    InteractionConfig interaction;
    Region region = Region::box(2, 0.0, 1.0);
    SamplerConfig sampler;
    EstimatorConfig estimator;
    ScheduleConfig schedule;

    [[nodiscard]] MarkedConfiguration probe() const {
        MarkedConfiguration c(region.dim);
        for (const auto& p : estimator.probe) c.add(p);
        return c;
    }

    [[nodiscard]] GcmcParams gcmc_params() const {
        GcmcParams p;
        p.z = sampler.z;
        p.beta = sampler.beta;
        p.region = region;
        p.kernel = kernel;
        p.density = interaction.build();
        p.charges = charges.build();
        p.w_birth = sampler.w_birth;
        p.w_death = sampler.w_death;
        p.w_displace = sampler.w_displace;
        p.displacement = sampler.displacement;
        p.seed = seed;
        p.burn_in = sampler.burn_in;
        p.thinning = sampler.thinning;
        p.domain = sampler.domain == "whole_space" ? EnergyDomain::whole_space : EnergyDomain::cutoff;
        p.panel = sampler.panel;
        p.order = sampler.order;
        return p;
    }

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

struct RawValue {
    std::string text;
    int line = 0;
    bool used = false;
};

using RawSection = std::map<std::string, RawValue>;

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

inline std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

class Reader {
public:
    Reader(std::map<std::string, RawSection>& raw, std::vector<ConfigIssue>& issues) : raw_(raw), issues_(issues) {}

    RawValue* find(const std::string& sec, const std::string& key) {
        auto s = raw_.find(sec);
        if (s == raw_.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    void error(const std::string& sec, const std::string& key, const std::string& msg) {
        issues_.push_back({line_of(sec, key), name(sec, key), msg});
    }

    int line_of(const std::string& sec, const std::string& key) {
        auto s = raw_.find(sec);
        if (s == raw_.end()) return 0;
        auto k = s->second.find(key);
        return k == s->second.end() ? 0 : k->second.line;
    }

    static std::string name(const std::string& sec, const std::string& key) {
        return sec.empty() ? key : sec + "." + key;
    }

    void get(const std::string& sec, const std::string& key, double& v) {
        if (auto* r = find(sec, key))
            if (!parse_double(r->text, v)) error(sec, key, "expected a number, got '" + r->text + "'");
    }

    template <class I>
    void get_int(const std::string& sec, const std::string& key, I& v, long long min_value = 0) {
        auto* r = find(sec, key);
        if (!r) return;
        long long x = 0;
        auto [p, ec] = std::from_chars(r->text.data(), r->text.data() + r->text.size(), x);
        if (ec != std::errc{} || p != r->text.data() + r->text.size()) {
            error(sec, key, "expected an integer, got '" + r->text + "'");
            return;
        }
        if (x < min_value) {
            error(sec, key, "must be >= " + std::to_string(min_value));
            return;
        }
        v = static_cast<I>(x);
    }

    void get(const std::string& sec, const std::string& key, std::string& v, const std::vector<std::string>& allowed) {
        auto* r = find(sec, key);
        if (!r) return;
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), r->text) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            error(sec, key, "unknown variant '" + r->text + "' (expected one of " + list + ")");
            return;
        }
        v = r->text;
    }

    void get_list(const std::string& sec, const std::string& key, std::vector<double>& v) {
        auto* r = find(sec, key);
        if (!r) return;
        std::vector<double> out;
        for (const auto& t : split(r->text, ',')) {
            double x;
            if (!parse_double(t, x)) {
                error(sec, key, "expected a comma separated list of numbers");
                return;
            }
            out.push_back(x);
        }
        v = out;
    }

    /// "s:w, s:w, ..."
    void get_atoms(const std::string& sec, const std::string& key, std::vector<std::pair<double, double>>& v) {
        auto* r = find(sec, key);
        if (!r) return;
        std::vector<std::pair<double, double>> out;
        for (const auto& t : split(r->text, ',')) {
            const auto c = t.find(':');
            double a, w;
            if (c == std::string::npos || !parse_double(trim(t.substr(0, c)), a) ||
                !parse_double(trim(t.substr(c + 1)), w)) {
                error(sec, key, "expected atoms as value:weight pairs");
                return;
            }
            out.push_back({a, w});
        }
        v = out;
    }

    void unused() {
        for (auto& [sec, keys] : raw_)
            for (auto& [key, val] : keys)
                if (!val.used) issues_.push_back({val.line, name(sec, key), "unknown field"});
    }

private:
    std::map<std::string, RawSection>& raw_;
    std::vector<ConfigIssue>& issues_;
};

inline const std::vector<std::string>& known_sections() {
    static const std::vector<std::string> s{"", "kernel", "charges", "interaction", "region", "sampler", "estimator", "schedule"};
    return s;
}

/// "x, y : s; x, y : s"
inline std::string format_probe(const std::vector<Particle>& probe, int dim) {
    std::string s;
    for (const auto& p : probe) {
        if (!s.empty()) s += "; ";
        for (int i = 0; i < dim; ++i) s += (i ? ", " : "") + fmt(p.x[i]);
        s += " : " + fmt(p.s);
    }
    return s;
}

}  // namespace detail

/// Parses and validates; throws ConfigError listing every issue.
inline ExperimentConfig parse_config(const std::string& text) {
    using namespace detail;
    std::vector<ConfigIssue> issues;
    std::map<std::string, RawSection> raw;
    {
        std::istringstream is(text);
        std::string line, section;
        int n = 0;
        while (std::getline(is, line)) {
            ++n;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') {
                    issues.push_back({n, line, "malformed section header"});
                    continue;
                }
                section = trim(line.substr(1, line.size() - 2));
                const auto& ks = known_sections();
                if (std::find(ks.begin(), ks.end(), section) == ks.end())
                    issues.push_back({n, section, "unknown section"});
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                issues.push_back({n, line, "expected key = value"});
                continue;
            }
            const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
            if (raw[section].count(key)) {
                issues.push_back({n, Reader::name(section, key), "duplicate field"});
                continue;
            }
            raw[section][key] = {val, n, false};
        }
    }

    Reader rd(raw, issues);
    ExperimentConfig c;
    c.kernel = KernelSpec::bessel(0.5, 1.0, 2);

    rd.get_int("", "seed", c.seed);
    if (auto* r = rd.find("", "output")) c.output = r->text;

    // kernel
    std::string variant = to_string(c.kernel.variant), base = "bessel_alpha";
    const std::vector<std::string> variants{"bessel_alpha", "yukawa", "indicator_ball", "uv_regularized"};
    rd.get("kernel", "variant", variant, variants);
    rd.get("kernel", "base", base, {"bessel_alpha", "yukawa"});
    c.kernel.variant = kernel_variant_from_string(variant);
    c.kernel.base = kernel_variant_from_string(base);
    rd.get("kernel", "alpha", c.kernel.alpha);
    rd.get("kernel", "m0", c.kernel.m0);
    rd.get_int("kernel", "dim", c.kernel.dim, 1);
    rd.get("kernel", "radius", c.kernel.radius);
    rd.get("kernel", "epsilon", c.kernel.epsilon);
    rd.get("kernel", "truncation_radius", c.kernel.truncation_radius);
    rd.get("kernel", "tail_tolerance", c.kernel.tail_tolerance);
    try {
        c.kernel.validate();
    } catch (const ParameterError& e) {
        std::string msg = e.what();
        std::string key = msg.find("alpha") != std::string::npos     ? "alpha"
                          : msg.find("m0") != std::string::npos      ? "m0"
                          : msg.find("radius") != std::string::npos  ? "radius"
                          : msg.find("epsilon") != std::string::npos ? "epsilon"
                          : msg.find("dim") != std::string::npos     ? "dim"
                                                                     : "variant";
        rd.error("kernel", key, msg);
    }

    // charges
    rd.get("charges", "law", c.charges.law, {"rademacher", "uniform", "atoms"});
    rd.get("charges", "q", c.charges.q);
    rd.get("charges", "c", c.charges.c);
    rd.get_int("charges", "nodes", c.charges.nodes, 2);
    rd.get_atoms("charges", "atoms", c.charges.atoms);
    if (c.charges.law == "atoms" && c.charges.atoms.empty()) rd.error("charges", "atoms", "missing field");
    try {
        (void)c.charges.build();
    } catch (const ParameterError& e) {
        rd.error("charges", c.charges.law == "atoms" ? "atoms" : "law", e.what());
    }

    // interaction
    rd.get("interaction", "kind", c.interaction.kind,
           {"trigonometric", "threshold", "hard_core", "quadratic_renormalized"});
    rd.get("interaction", "law", c.interaction.law, {"rademacher", "atoms"});
    rd.get("interaction", "b", c.interaction.b);
    rd.get_atoms("interaction", "atoms", c.interaction.atoms);
    rd.get("interaction", "C", c.interaction.C);
    rd.get("interaction", "mode", c.interaction.mode, {"above", "abs_above", "band"});
    rd.get_int("interaction", "l", c.interaction.l, 1);
    if (c.interaction.law == "atoms" && c.interaction.atoms.empty()) rd.error("interaction", "atoms", "missing field");
    try {
        (void)c.interaction.build();
    } catch (const ParameterError& e) {
        rd.error("interaction", "atoms", e.what());
    }

    // region
    c.region = Region::box(c.kernel.dim, 0.0, 1.0);
    int rdim = c.kernel.dim;
    rd.get_int("region", "dim", rdim, 1);
    if (rdim != c.kernel.dim)
        rd.error("region", "dim", "unit mismatch: region has dimension " + std::to_string(rdim) + ", kernel has " +
                                      std::to_string(c.kernel.dim));
    if (rdim >= 1 && rdim <= 3) c.region = Region::box(rdim, 0.0, 1.0);
    for (const char* key : {"lo", "hi"}) {
        std::vector<double> v;
        rd.get_list("region", key, v);
        if (v.empty()) continue;
        if (v.size() != 1 && static_cast<int>(v.size()) != c.region.dim) {
            rd.error("region", key, "expected 1 or dim values");
            continue;
        }
        Point& target = std::string(key) == "lo" ? c.region.lo : c.region.hi;
        for (int i = 0; i < c.region.dim; ++i) target[i] = v.size() == 1 ? v[0] : v[i];
    }
    std::string boundary = "open";
    rd.get("region", "boundary", boundary, {"open", "periodic"});
    c.region.boundary = boundary == "periodic" ? Boundary::periodic : Boundary::open;
    try {
        c.region.validate();
    } catch (const std::exception& e) {
        rd.error("region", "hi", e.what());
    }

    // sampler
    rd.get("sampler", "z", c.sampler.z);
    rd.get("sampler", "beta", c.sampler.beta);
    rd.get_int("sampler", "samples", c.sampler.samples, 1);
    rd.get_int("sampler", "burn_in", c.sampler.burn_in);
    rd.get_int("sampler", "thinning", c.sampler.thinning, 1);
    rd.get("sampler", "displacement", c.sampler.displacement);
    rd.get("sampler", "w_birth", c.sampler.w_birth);
    rd.get("sampler", "w_death", c.sampler.w_death);
    rd.get("sampler", "w_displace", c.sampler.w_displace);
    rd.get("sampler", "domain", c.sampler.domain, {"cutoff", "whole_space"});
    rd.get("sampler", "panel", c.sampler.panel);
    rd.get_int("sampler", "order", c.sampler.order, 1);
    if (!(c.sampler.z >= 0.0)) rd.error("sampler", "z", "activity must be >= 0");
    if (!(c.sampler.beta >= 0.0)) rd.error("sampler", "beta", "inverse temperature must be >= 0");
    if (c.sampler.panel > 0.0 && c.sampler.panel > c.region.length(0))
        rd.error("sampler", "panel", "unit mismatch: panel wider than the region");
    if (c.sampler.displacement < 0.0) rd.error("sampler", "displacement", "must be >= 0");

    // estimator
    if (auto* r = rd.find("estimator", "probe"); r && !r->text.empty()) {
        for (const auto& item : split(r->text, ';')) {
            const auto colon = item.find(':');
            std::vector<double> xs;
            double s = 0.0;
            bool ok = colon != std::string::npos && parse_double(trim(item.substr(colon + 1)), s);
            if (ok)
                for (const auto& t : split(item.substr(0, colon), ',')) {
                    double x;
                    if (!parse_double(t, x)) ok = false;
                    xs.push_back(x);
                }
            if (!ok || static_cast<int>(xs.size()) != c.region.dim) {
                rd.error("estimator", "probe", "expected 'x[, y[, z]] : charge' entries matching the region dimension");
                break;
            }
            Particle p;
            for (std::size_t i = 0; i < xs.size(); ++i) p.x[i] = xs[i];
            p.s = s;
            if (!c.region.contains(p.x)) rd.error("estimator", "probe", "probe position outside the region");
            c.estimator.probe.push_back(p);
        }
    }
    rd.get_int("estimator", "order", c.estimator.order, 0);
    rd.get_int("estimator", "qmc_points", c.estimator.qmc_points, 1);
    rd.get_int("estimator", "replicates", c.estimator.replicates, 2);
    rd.get("estimator", "min_ess", c.estimator.min_ess);
    rd.get_int("estimator", "raster", c.estimator.raster, 2);
    rd.get("estimator", "level", c.estimator.level);

    // schedule
    rd.get_list("schedule", "z", c.schedule.z);
    rd.get("schedule", "t_max", c.schedule.t_max);
    rd.get_int("schedule", "t_points", c.schedule.t_points, 1);
    rd.get("schedule", "lambda", c.schedule.lambda);
    for (std::size_t i = 0; i < c.schedule.z.size(); ++i)
        if (!(c.schedule.z[i] > 0.0) || (i && c.schedule.z[i] <= c.schedule.z[i - 1])) {
            rd.error("schedule", "z", "values must be positive and increasing");
            break;
        }
    if (!(c.schedule.lambda > 0.0)) rd.error("schedule", "lambda", "must be > 0");

    rd.unused();
    if (!issues.empty()) {
        std::stable_sort(issues.begin(), issues.end(),
                         [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
        throw ConfigError(std::move(issues));
    }
    return c;
}

/// Writes every field, so parse_config(serialize(c)) == c.
inline std::string serialize(const ExperimentConfig& c) {
    using detail::fmt;
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (double x : v) s += (s.empty() ? "" : ", ") + fmt(x);
        return s;
    };
    auto atoms = [](const std::vector<std::pair<double, double>>& v) {
        std::string s;
        for (auto [a, w] : v) s += (s.empty() ? "" : ", ") + fmt(a) + ":" + fmt(w);
        return s;
    };
    auto point = [&](const Point& p) {
        std::vector<double> v(p.begin(), p.begin() + c.region.dim);
        return list(v);
    };
    std::ostringstream os;
    os << "seed = " << c.seed << "\n";
    if (!c.output.empty()) os << "output = " << c.output << "\n";
    const auto& k = c.kernel;
    os << "\n[kernel]\nvariant = " << to_string(k.variant) << "\nbase = " << to_string(k.base)
       << "\nalpha = " << fmt(k.alpha) << "\nm0 = " << fmt(k.m0) << "\ndim = " << k.dim << "\nradius = " << fmt(k.radius)
       << "\nepsilon = " << fmt(k.epsilon) << "\ntruncation_radius = " << fmt(k.truncation_radius)
       << "\ntail_tolerance = " << fmt(k.tail_tolerance) << "\n";
    const auto& ch = c.charges;
    os << "\n[charges]\nlaw = " << ch.law << "\nq = " << fmt(ch.q) << "\nc = " << fmt(ch.c) << "\nnodes = " << ch.nodes
       << "\n";
    if (!ch.atoms.empty()) os << "atoms = " << atoms(ch.atoms) << "\n";
    const auto& in = c.interaction;
    os << "\n[interaction]\nkind = " << in.kind << "\nlaw = " << in.law << "\nb = " << fmt(in.b) << "\nC = " << fmt(in.C)
       << "\nmode = " << in.mode << "\nl = " << in.l << "\n";
    if (!in.atoms.empty()) os << "atoms = " << atoms(in.atoms) << "\n";
    os << "\n[region]\ndim = " << c.region.dim << "\nlo = " << point(c.region.lo) << "\nhi = " << point(c.region.hi)
       << "\nboundary = " << (c.region.periodic() ? "periodic" : "open") << "\n";
    const auto& s = c.sampler;
    os << "\n[sampler]\nz = " << fmt(s.z) << "\nbeta = " << fmt(s.beta) << "\nsamples = " << s.samples
       << "\nburn_in = " << s.burn_in << "\nthinning = " << s.thinning << "\ndisplacement = " << fmt(s.displacement)
       << "\nw_birth = " << fmt(s.w_birth) << "\nw_death = " << fmt(s.w_death) << "\nw_displace = " << fmt(s.w_displace)
       << "\ndomain = " << s.domain << "\npanel = " << fmt(s.panel) << "\norder = " << s.order << "\n";
    const auto& e = c.estimator;
    os << "\n[estimator]\n";
    if (!e.probe.empty()) os << "probe = " << detail::format_probe(e.probe, c.region.dim) << "\n";
    os << "order = " << e.order << "\nqmc_points = " << e.qmc_points << "\nreplicates = " << e.replicates
       << "\nmin_ess = " << fmt(e.min_ess) << "\nraster = " << e.raster << "\nlevel = " << fmt(e.level) << "\n";
    os << "\n[schedule]\nz = " << list(c.schedule.z) << "\nt_max = " << fmt(c.schedule.t_max)
       << "\nt_points = " << c.schedule.t_points << "\nlambda = " << fmt(c.schedule.lambda) << "\n";
    return os.str();
}

}  // namespace cpn
