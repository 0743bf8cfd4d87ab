// cpn: command line driver for sampling, estimation and scaling experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "cpn/config.hpp"
#include "cpn/fields.hpp"
#include "cpn/gcmc.hpp"
#include "cpn/kernels.hpp"
#include "cpn/limits.hpp"
#include "cpn/series.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cpn;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { ok = 0, failure = 1, bad_config = 2, tolerance = 3, unreliable = 4 };

struct Options {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool strict = false;
    int threads = 1;
};

/// One run directory: CSV artifacts plus manifest.json, written once.
class Run {
public:
    Run(std::string command, const ExperimentConfig& cfg, const Options& opt)
        : command_(std::move(command)), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
        fs::path root = opt.out;
        if (root.empty()) root = cfg.output;
        if (root.empty()) {
            const char* env = std::getenv("CPN_OUTPUT_ROOT");
            root = fs::path(env ? env : "runs") / (command_ + "-" + std::to_string(cfg.seed));
        }
        dir_ = root;
        if (fs::exists(dir_ / "manifest.json"))
            throw std::runtime_error("run directory " + dir_.string() + " already holds a manifest");
        fs::create_directories(dir_);
        manifest_["command"] = command_;
        manifest_["version"] = kVersion;
        manifest_["seed"] = cfg.seed;
        manifest_["threads"] = opt.threads;
        manifest_["config"] = serialize(cfg);
        manifest_["outputs"] = json::array();
        manifest_["estimates"] = json::object();
        manifest_["warnings"] = json::array();
    }

    std::ofstream open(const std::string& name) {
        const fs::path p = dir_ / name;
        if (fs::exists(p)) throw std::runtime_error("refusing to overwrite " + p.string());
        std::ofstream os(p);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        os.precision(17);
        manifest_["outputs"].push_back(name);
        return os;
    }

    void estimate(const std::string& key, double value, double error) {
        manifest_["estimates"][key] = {{"value", value}, {"error", error}};
    }
    void estimate(const std::string& key, cplx value, double error) {
        manifest_["estimates"][key] = {{"re", value.real()}, {"im", value.imag()}, {"error", error}};
    }
    void warn(const std::string& w) { manifest_["warnings"].push_back(w); }
    void note(const std::string& key, json v) { manifest_[key] = std::move(v); }
    [[nodiscard]] bool has_warnings() const { return !manifest_["warnings"].empty(); }

    void finish(int status) {
        manifest_["exit_code"] = status;
        manifest_["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream os(dir_ / "manifest.json");
        os << manifest_.dump(2) << '\n';
    }

    [[nodiscard]] const fs::path& dir() const { return dir_; }

private:
    std::string command_;
    const ExperimentConfig& cfg_;
    std::chrono::steady_clock::time_point start_;
    fs::path dir_;
    json manifest_;
};

/// Evaluates f(0..n-1) on up to `threads` workers; results keep their index order.
template <class F>
auto parallel_map(std::size_t n, int threads, F&& f) {
    using R = decltype(f(std::size_t{0}));
    std::vector<R> out(n);
    const std::size_t w = std::max(1, threads);
    for (std::size_t start = 0; start < n; start += w) {
        std::vector<std::future<R>> batch;
        for (std::size_t i = start; i < std::min(n, start + w); ++i)
            batch.push_back(std::async(w > 1 ? std::launch::async : std::launch::deferred, [&f, i] { return f(i); }));
        for (std::size_t i = 0; i < batch.size(); ++i) out[start + i] = batch[i].get();
    }
    return out;
}

int cmd_sample(const ExperimentConfig& cfg, Run& run) {
    GcmcParams p = cfg.gcmc_params();
    GcmcChain chain(p);
    auto os = run.open("samples.csv");
    os << "index,n,energy\n";
    auto summary = cpn::run(chain, cfg.sampler.samples, [&](const GcmcChain& c, std::size_t k) {
        os << k << ',' << c.config().size() << ',' << c.energy() << '\n';
    });
    auto cs = run.open("final_config.csv");
    chain.config().write_csv(cs);
    run.estimate("mean_n", summary.mean_n.real(), summary.mean_n.stderr());
    run.estimate("mean_energy", summary.mean_u.real(), summary.mean_u.stderr());
    json acc;
    const char* names[] = {"birth", "death", "displace"};
    for (int t = 0; t < 3; ++t)
        acc[names[t]] = summary.proposed[t] ? double(summary.accepted[t]) / double(summary.proposed[t]) : 0.0;
    run.note("acceptance", acc);
    return ok;
}

int cmd_estimate_rho(const ExperimentConfig& cfg, Run& run) {
    const auto r = estimate_rho(cfg.probe(), cfg.gcmc_params(), cfg.sampler.samples);
    auto os = run.open("rho.csv");
    os << "re,im,stderr,ess,n,u_eta,ruelle_bound,ruelle_ok\n";
    os << r.result.mean.real() << ',' << r.result.mean.imag() << ',' << r.result.stderr() << ',' << r.result.ess << ','
       << r.result.n << ',' << r.u_eta << ',' << r.ruelle_bound << ',' << r.ruelle_ok << '\n';
    run.estimate("rho", r.result.mean, r.result.stderr());
    for (const auto& w : r.result.warnings) run.warn(w);
    return ok;
}

int cmd_estimate_char(const ExperimentConfig& cfg, Run& run) {
    const auto r = estimate_char_functional(cfg.probe(), cfg.gcmc_params(), cfg.sampler.samples, cfg.estimator.min_ess);
    auto os = run.open("char.csv");
    os << "re,im,stderr,ess,n\n";
    os << r.mean.real() << ',' << r.mean.imag() << ',' << r.stderr() << ',' << r.ess << ',' << r.n << '\n';
    run.estimate("char", r.mean, r.stderr());
    for (const auto& w : r.warnings) run.warn(w);
    return ok;
}

int cmd_series(const ExperimentConfig& cfg, Run& run) {
    const GcmcParams p = cfg.gcmc_params();
    const Kernel k(p.kernel);
    const auto dom = convergence_domain(k, p.charges, p.density.nu);
    const auto h = ht_series_rho(cfg.probe(), p, cfg.estimator.order, cfg.estimator.qmc_points, cfg.estimator.replicates);
    auto os = run.open("series.csv");
    os << "n,numerator_re,numerator_im,numerator_err,denominator_re,denominator_err,rho_re,rho_im,rho_err,flagged\n";
    for (int n = 0; n <= h.rho.order(); ++n)
        os << n << ',' << h.numerator.a[n].real() << ',' << h.numerator.a[n].imag() << ',' << h.numerator.err[n] << ','
           << h.denominator.a[n].real() << ',' << h.denominator.err[n] << ',' << h.rho.a[n].real() << ','
           << h.rho.a[n].imag() << ',' << h.rho.err[n] << ',' << h.rho.flagged[n] << '\n';
    run.estimate("rho_at_beta", h.rho(p.beta), h.rho.error_at(p.beta));
    run.note("convergence_domain", {{"C1", dom.C1}, {"C2", dom.C2}, {"z_radius", dom.z_radius},
                                    {"beta_radius", dom.beta_radius}, {"contains", dom.contains(p.z, p.beta)}});
    if (!dom.contains(p.z, p.beta)) run.warn("(z, beta) outside the computed convergence domain");
    for (int n = 0; n <= h.rho.order(); ++n)
        if (h.rho.flagged[n]) throw ToleranceError("series coefficient " + std::to_string(n) + " flagged", h.rho.err[n]);
    return ok;
}

int cmd_potts(const ExperimentConfig& cfg, Run& run) {
    const GcmcParams p = cfg.gcmc_params();
    const Kernel k(p.kernel);
    RngStream rng(cfg.seed, 0, 11);
    const auto rep = potts_projection_check(cfg.probe(), p.beta, cfg.interaction.measure(), k, p.region,
                                            cfg.sampler.samples, rng);
    auto os = run.open("potts.csv");
    os << "lhs,rhs_re,rhs_im,stderr,z_score,samples\n";
    os << rep.lhs << ',' << rep.rhs.real() << ',' << rep.rhs.imag() << ',' << rep.stderr << ',' << rep.z_score << ','
       << rep.samples << '\n';
    run.estimate("projection", rep.rhs, rep.stderr);
    if (rep.z_score >= 3.0) run.warn("projection z-score " + std::to_string(rep.z_score));
    return ok;
}

int cmd_duality(const ExperimentConfig& cfg, Run& run) {
    DualityPairing pair;
    pair.z = cfg.sampler.z;
    pair.beta = cfg.sampler.beta;
    pair.r = cfg.charges.build();
    pair.nu = cfg.interaction.measure();
    pair.kernel = cfg.kernel;
    pair.region = cfg.region;
    const GcmcParams base = cfg.gcmc_params();
    auto os = run.open("duality.csv");
    os << "method,lhs_re,lhs_im,lhs_stderr,rhs_re,rhs_im,rhs_stderr,z_score\n";
    if (pair.beta == 0.0) {
        const auto c = duality_closed_form(cfg.probe(), pair);
        os << "closed_form," << c.lhs.real() << ',' << c.lhs.imag() << ",0," << c.rhs << ",0,0,"
           << (c.rel_error > 1e-8 ? kInf : 0.0) << '\n';
        run.estimate("relative_gap", c.rel_error, 0.0);
        return ok;
    }
    const auto rep = duality_check(cfg.probe(), pair, base, cfg.sampler.samples);
    os << "sampled," << rep.lhs.mean.real() << ',' << rep.lhs.mean.imag() << ',' << rep.lhs.stderr() << ','
       << rep.rhs.result.mean.real() << ',' << rep.rhs.result.mean.imag() << ',' << rep.rhs.result.stderr() << ','
       << rep.z_score << '\n';
    run.estimate("characteristic", rep.lhs.mean, rep.lhs.stderr());
    run.estimate("correlation", rep.rhs.result.mean, rep.rhs.result.stderr());
    run.estimate("z_score", rep.z_score, 0.0);
    for (const auto& w : rep.warnings) run.warn(w);
    return ok;
}

int cmd_scaling(const ExperimentConfig& cfg, Run& run, int threads) {
    ScalingSchedule s;
    s.z = cfg.schedule.z;
    s.r = cfg.charges.build();
    s.t = ScalingSchedule::t_grid(cfg.schedule.t_max, cfg.schedule.t_points);
    const auto psi = psi_limit_table(s);
    auto os = run.open("psi_limit.csv");
    os << "z,value,error\n";
    for (const auto& row : psi) os << row.z << ',' << row.max_error << ",0\n";

    const MarkedConfiguration probe = cfg.probe();
    if (!probe.empty()) {
        const Kernel k(cfg.kernel);
        const double e = probe_energy(probe, PairPotential(cfg.kernel));
        const double gauss = std::isinf(e) ? 0.0 : std::exp(-0.5 * s.sigma_sq() * e);
        auto rows = parallel_map(s.z.size(), threads, [&](std::size_t i) {
            ScalingSchedule one = s;
            one.z = {s.z[i]};
            return gaussian_limit_report(one, k, probe).rows.front();
        });
        auto gs = run.open("gaussian_limit.csv");
        gs << "z,value,error,gaussian,gap\n";
        for (const auto& r : rows) gs << r.z << ',' << r.cpn.real() << ",0," << gauss << ',' << r.gap << '\n';
        int inversions = 0;
        for (std::size_t i = 1; i < rows.size(); ++i) inversions += rows[i].gap > rows[i - 1].gap;
        run.note("sigma_sq", {{"clt", s.sigma_sq()}, {"alternative_2x", 2.0 * s.sigma_sq()}});
        if (inversions > 1) run.warn("gaussian-limit gaps not monotone");
    }
    return ok;
}

int cmd_sg(const ExperimentConfig& cfg, Run& run, int threads) {
    if (cfg.region.dim != 2) throw ParameterError("sg-converge needs a two-dimensional region");
    SineGordonSetup s;
    s.m0 = cfg.kernel.m0;
    s.r = cfg.charges.build();
    s.nu = cfg.interaction.measure();
    s.region = cfg.region;
    s.tail_tolerance = cfg.kernel.tail_tolerance;
    GaussianBump b;
    for (int i = 0; i < 2; ++i) b.c[i] = 0.5 * (cfg.region.lo[i] + cfg.region.hi[i]);
    b.width = 0.1 * std::min(cfg.region.length(0), cfg.region.length(1));
    b.height = cfg.estimator.level;
    s.f = {b};
    const SineGordon sg(s);
    const MarkedConfiguration c = cfg.probe();
    const double g = sg.gaussian(c);
    const auto vals = parallel_map(cfg.schedule.z.size(), threads, [&](std::size_t i) {
        return sg.scaled(cfg.schedule.z[i], c);
    });
    auto os = run.open("sg_converge.csv");
    os << "z,value,error,gaussian,gap\n";
    for (std::size_t i = 0; i < vals.size(); ++i)
        os << cfg.schedule.z[i] << ',' << vals[i] << ",0," << g << ',' << std::abs(vals[i] - g) << '\n';
    run.estimate("gaussian", g, 0.0);
    run.note("sigma_sq", {{"clt", s.sigma_sq()}, {"alternative_2x", 2.0 * s.sigma_sq()}});
    return ok;
}

int cmd_raster(const ExperimentConfig& cfg, Run& run) {
    const GcmcParams p = cfg.gcmc_params();
    MarkedConfiguration config(p.region.dim);
    if (!cfg.estimator.probe.empty()) {
        config = cfg.probe();
    } else {
        RngStream rng(cfg.seed, 0, 12);
        config = sample_free(p.region, p.z, p.charges, rng);
    }
    const Kernel k(p.kernel);
    std::array<int, 3> cells{cfg.estimator.raster, cfg.estimator.raster, cfg.estimator.raster};
    const FieldGrid g = superpose(config, k, p.region, cells);
    auto gs = run.open("field.grid");
    g.write(gs);
    auto cs = run.open("config.csv");
    config.write_csv(cs);
    auto ss = run.open("level_sets.csv");
    ss << "level,volume_above,contour_length\n";
    const double len = p.region.dim == 2 ? contour_length(g, cfg.estimator.level) : 0.0;
    ss << cfg.estimator.level << ',' << threshold_volume(g, cfg.estimator.level) << ',' << len << '\n';
    return ok;
}

int cmd_kernel_table(const ExperimentConfig& cfg, Run& run) {
    const Kernel k(cfg.kernel);
    const PairPotential phi(cfg.kernel);
    std::vector<double> radii;
    const double lo = 1e-4 / cfg.kernel.m0, hi = k.truncation();
    for (int i = 0; i <= 200; ++i) radii.push_back(lo * std::pow(hi / lo, i / 200.0));
    auto os = run.open("kernel.csv");
    os << "radius,kernel,pair\n";
    for (double r : radii) os << r << ',' << k(r) << ',' << phi(r) << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convoluted Poisson noise experiments"};
    app.set_version_flag("--version", kVersion);
    Options opt;
    app.add_option("-c,--config", opt.config_path, "experiment config file")->check(CLI::ExistingFile);
    app.add_option("-o,--out", opt.out, "run directory (default $CPN_OUTPUT_ROOT/<command>-<seed>)");
    auto* seed = app.add_option("--seed", opt.seed, "override the config seed");
    app.add_flag("--strict", opt.strict, "exit nonzero on estimator reliability warnings");
    app.add_option("--threads", opt.threads, "worker threads for schedule sweeps")->check(CLI::PositiveNumber);
    app.require_subcommand(1);
    app.fallthrough();

    const std::vector<std::pair<std::string, std::string>> commands{
        {"sample", "run the grand canonical sampler and write per-sample counts and energies"},
        {"estimate-rho", "correlation functional at the probe configuration"},
        {"estimate-char", "characteristic functional of the interacting field at the probe"},
        {"series", "high-temperature series of the correlation functional"},
        {"potts-check", "two-component projection identity at the probe"},
        {"duality-check", "characteristic functional against the dual correlation functional"},
        {"scaling-sweep", "continuum-limit exponents and Gaussian-limit gaps over the z schedule"},
        {"sg-converge", "sine-Gordon weights against their Gaussian limit over the z schedule"},
        {"field-raster", "rasterise a field realisation and its level-set statistics"},
        {"kernel-table", "tabulate the kernel and pair potential"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    opt.seed_set = seed->count() > 0;
    const std::string command = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        std::string text;
        if (!opt.config_path.empty()) {
            std::ifstream is(opt.config_path);
            std::stringstream ss;
            ss << is.rdbuf();
            text = ss.str();
        }
        cfg = parse_config(text);
    } catch (const ConfigError& e) {
        std::cerr << "config errors:\n" << e.what() << '\n';
        return bad_config;
    }
    if (opt.seed_set) cfg.seed = opt.seed;

    std::unique_ptr<Run> run;
    try {
        run = std::make_unique<Run>(command, cfg, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }

    int status = ok;
    try {
        if (command == "sample") status = cmd_sample(cfg, *run);
        else if (command == "estimate-rho") status = cmd_estimate_rho(cfg, *run);
        else if (command == "estimate-char") status = cmd_estimate_char(cfg, *run);
        else if (command == "series") status = cmd_series(cfg, *run);
        else if (command == "potts-check") status = cmd_potts(cfg, *run);
        else if (command == "duality-check") status = cmd_duality(cfg, *run);
        else if (command == "scaling-sweep") status = cmd_scaling(cfg, *run, opt.threads);
        else if (command == "sg-converge") status = cmd_sg(cfg, *run, opt.threads);
        else if (command == "field-raster") status = cmd_raster(cfg, *run);
        else status = cmd_kernel_table(cfg, *run);
    } catch (const ToleranceError& e) {
        std::cerr << "tolerance failure: " << e.what() << '\n';
        run->warn(e.what());
        status = tolerance;
    } catch (const ConsistencyError& e) {
        std::cerr << "tolerance failure: " << e.what() << '\n';
        run->warn(e.what());
        status = tolerance;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        run->warn(e.what());
        status = failure;
    }
    if (status == ok && opt.strict && run->has_warnings()) {
        std::cerr << "reliability warnings with --strict; see manifest.json\n";
        status = unreliable;
    }
    run->finish(status);
    std::cout << run->dir().string() << '\n';
    return status;
}
