#pragma once

// Grand-canonical Metropolis sampling of z^n/n! e^{-beta U} and the
// estimators built on it: Widom insertion for the correlation functional,
// the reweighted characteristic functional and moments.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpn/ensembles.hpp"
#include "cpn/geometry.hpp"
#include "cpn/kernels.hpp"
#include "cpn/potentials.hpp"
#include "cpn/quadrature.hpp"
#include "cpn/rng.hpp"
#include "cpn/stats.hpp"

namespace cpn {

class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor Gauss-Legendre nodes over a box (uniform panels per axis), with
/// range queries for the nodes inside a ball.
class NodeGrid {
public:
    NodeGrid() = default;

    NodeGrid(const Region& box, double panel, int order) : box_(box) {
        box.validate();
        const GaussRule& g = gauss_legendre(order);
        for (int i = 0; i < 3; ++i) {
            coord_[i].clear();
            weight_[i].clear();
            if (i >= box.dim) {
                coord_[i] = {0.0};
                weight_[i] = {1.0};
                continue;
            }
            const int np = std::max(1, static_cast<int>(std::ceil(box.length(i) / panel - 1e-9)));
            const double h = box.length(i) / np;
            for (int p = 0; p < np; ++p) {
                const double a = box.lo[i] + p * h;
                for (int q = 0; q < order; ++q) {
                    coord_[i].push_back(a + 0.5 * h * (g.x[q] + 1.0));
                    weight_[i].push_back(0.5 * h * g.w[q]);
                }
            }
        }
        n_ = {coord_[0].size(), coord_[1].size(), coord_[2].size()};
    }

    [[nodiscard]] std::size_t size() const { return n_[0] * n_[1] * n_[2]; }
    [[nodiscard]] const Region& box() const { return box_; }
    [[nodiscard]] int dim() const { return box_.dim; }

    [[nodiscard]] Point node(std::size_t k) const {
        const std::size_t a = k % n_[0], b = (k / n_[0]) % n_[1], c = k / (n_[0] * n_[1]);
        return {coord_[0][a], coord_[1][b], coord_[2][c]};
    }
    [[nodiscard]] double weight(std::size_t k) const {
        const std::size_t a = k % n_[0], b = (k / n_[0]) % n_[1], c = k / (n_[0] * n_[1]);
        return weight_[0][a] * weight_[1][b] * weight_[2][c];
    }

    /// Calls f(k, r) for every node k within distance R of y (all periodic images).
    template <class F>
    void for_each_near(const Point& y, double R, F&& f) const {
        const int dim = box_.dim;
        const std::vector<Point> shifts = box_.image_shifts(R);
        for (const auto& sh : shifts) {
            std::array<std::size_t, 3> lo{0, 0, 0}, hi{1, 1, 1};
            bool empty = false;
            for (int i = 0; i < dim; ++i) {
                const double c = y[i] + sh[i];
                lo[i] = static_cast<std::size_t>(std::lower_bound(coord_[i].begin(), coord_[i].end(), c - R) - coord_[i].begin());
                hi[i] = static_cast<std::size_t>(std::upper_bound(coord_[i].begin(), coord_[i].end(), c + R) - coord_[i].begin());
                if (lo[i] >= hi[i]) empty = true;
            }
            if (empty) continue;
            const double R2 = R * R;
            for (std::size_t c = lo[2]; c < hi[2]; ++c) {
                const double dz = dim > 2 ? coord_[2][c] - y[2] - sh[2] : 0.0;
                for (std::size_t b = lo[1]; b < hi[1]; ++b) {
                    const double dy = dim > 1 ? coord_[1][b] - y[1] - sh[1] : 0.0;
                    const double r2yz = dy * dy + dz * dz;
                    if (r2yz > R2) continue;
                    for (std::size_t a = lo[0]; a < hi[0]; ++a) {
                        const double dx = coord_[0][a] - y[0] - sh[0];
                        const double r2 = dx * dx + r2yz;
                        if (r2 > R2) continue;
                        f(a + n_[0] * (b + n_[1] * c), std::sqrt(r2));
                    }
                }
            }
        }
    }

private:
    Region box_;
    std::array<std::vector<double>, 3> coord_, weight_;
    std::array<std::size_t, 3> n_{0, 0, 0};
};

/// Default panel width for node grids: resolves the kernel's smallest length scale.
inline double default_panel(const KernelSpec& k) {
    switch (k.variant) {
        case KernelVariant::uv_regularized: return std::min(k.epsilon, 0.5 / k.m0);
        case KernelVariant::indicator_ball: return k.radius / 4.0;
        default: return 0.25 / k.m0;
    }
}

enum class EnergyDomain { cutoff, whole_space };

struct GcmcParams {
    double z = 1.0;
    double beta = 0.0;
    Region region = Region::box(1, 0.0, 1.0);
    KernelSpec kernel = KernelSpec::indicator(0.1, 1);
    EnergyDensity density = EnergyDensity::trigonometric(InteractionMeasure::rademacher());
    ChargeDistribution charges = ChargeDistribution::rademacher();
    double w_birth = 0.35, w_death = 0.35, w_displace = 0.30;
    double displacement = 0.1;
    std::uint64_t seed = 0, chain = 0;
    std::size_t burn_in = 1000, thinning = 10;
    EnergyDomain domain = EnergyDomain::cutoff;  ///< whole_space integrates the energy over R^d
    double panel = 0.0;                          ///< node panel width, 0 picks default_panel
    int order = 6;                               ///< Gauss points per panel and axis
    std::size_t resync_interval = 10000;
    double resync_tolerance = 1e-8;

    void validate() const {
        region.validate();
        kernel.validate();
        if (kernel.dim != region.dim) throw ParameterError("kernel and region dimensions differ");
        if (!(z >= 0.0)) throw ParameterError("activity must be >= 0");
        if (!(beta >= 0.0)) throw ParameterError("inverse temperature must be >= 0");
        if (!(w_birth > 0 && w_death > 0 && w_displace >= 0)) throw ParameterError("move weights must be positive");
        if (domain == EnergyDomain::whole_space && !density.vanishes_at_zero())
            throw ParameterError("whole-space energy needs v(0) = 0");
        if (thinning == 0) throw ParameterError("thinning must be >= 1");
    }
};

enum class MoveType { birth, death, displace };

struct StepInfo {
    MoveType type = MoveType::birth;
    bool accepted = false;
    double delta_u = 0.0;
    double acceptance = 0.0;  ///< Metropolis acceptance probability of the proposal
};

struct ChainSummary {
    std::size_t steps = 0;
    std::array<std::size_t, 3> proposed{0, 0, 0}, accepted{0, 0, 0};
    EstimatorResult mean_n;
    EstimatorResult mean_u;
};

/// One Markov chain: configuration, cached node field and energy, and its rng stream.
class GcmcChain {
public:
    explicit GcmcChain(const GcmcParams& p) : p_(p), kernel_(p.kernel), rng_(p.seed, p.chain, 0), config_(p.region.dim) {
        p_.validate();
        const double w = p.w_birth + p.w_death + p.w_displace;
        pb_ = p.w_birth / w;
        pd_ = p.w_death / w;
        if (p.density.kind == DensityKind::hard_core) {
            model_ = Model::hard_core;
        } else if (p.density.kind == DensityKind::quadratic_renormalized) {
            model_ = Model::pair_sum;
            phi_ = PairPotential(p.kernel);
        } else {
            model_ = Model::grid;
            Region box = p.region;
            if (p.domain == EnergyDomain::whole_space) box = p.region.expanded(kernel_.truncation());
            grid_ = NodeGrid(box, p.panel > 0 ? p.panel : default_panel(p.kernel), p.order);
            field_.assign(grid_.size(), 0.0);
            scratch_.assign(grid_.size(), 0.0);
            weights_.resize(grid_.size());
            for (std::size_t k = 0; k < grid_.size(); ++k) weights_[k] = grid_.weight(k);
        }
        u_ = energy_from_scratch();
    }

    [[nodiscard]] const MarkedConfiguration& config() const { return config_; }
    [[nodiscard]] double energy() const { return u_; }
    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] const GcmcParams& params() const { return p_; }
    [[nodiscard]] const Kernel& kernel() const { return kernel_; }
    [[nodiscard]] const NodeGrid& grid() const { return grid_; }
    [[nodiscard]] const std::vector<double>& node_field() const { return field_; }
    [[nodiscard]] bool uses_grid() const { return model_ == Model::grid; }
    RngStream& rng() { return rng_; }

    /// Replaces the configuration (positions must lie in the region).
    void set_config(const MarkedConfiguration& c) {
        config_ = c;
        if (model_ == Model::grid) rebuild_field();
        u_ = energy_from_scratch();
    }

    /// Energy of an arbitrary configuration under this chain's energy model.
    [[nodiscard]] double energy_of(const MarkedConfiguration& c) const {
        switch (model_) {
            case Model::hard_core:
                return hard_core_overlap(c, p_.kernel, p_.density, &p_.region) ? kInf : 0.0;
            case Model::pair_sum: {
                const Region* metric = p_.region.periodic() ? &p_.region : nullptr;
                return quadratic_renormalized_U(c, phi_, metric).value;
            }
            case Model::grid: {
                std::vector<double> f(grid_.size(), 0.0);
                for (const auto& q : c.particles())
                    grid_.for_each_near(q.x, kernel_.truncation(), [&](std::size_t k, double r) { f[k] += q.s * kernel_(r); });
                return grid_energy(f);
            }
        }
        return 0.0;
    }

    /// One Metropolis proposal.
    StepInfo step() {
        StepInfo info;
        const double u = rng_.uniform();
        const std::size_t n = config_.size();
        const double zv = p_.z * p_.region.volume();
        ++steps_;
        if (u < pb_) {
            info.type = MoveType::birth;
            Particle q;
            for (int i = 0; i < p_.region.dim; ++i) q.x[i] = rng_.uniform(p_.region.lo[i], p_.region.hi[i]);
            q.s = p_.charges.sample(rng_);
            info.delta_u = delta_birth(q);
            info.acceptance = acceptance(pd_ / pb_ * zv / (n + 1.0), info.delta_u);
            if (rng_.uniform() < info.acceptance) {
                commit_birth(q, info.delta_u);
                info.accepted = true;
            }
        } else if (u < pb_ + pd_) {
            info.type = MoveType::death;
            if (n == 0) {
                info.acceptance = 0.0;
            } else {
                const std::size_t i = rng_.below(n);
                info.delta_u = delta_death(i);
                info.acceptance = acceptance(pb_ / pd_ * n / zv, info.delta_u);
                if (rng_.uniform() < info.acceptance) {
                    commit_death(i, info.delta_u);
                    info.accepted = true;
                }
            }
        } else {
            info.type = MoveType::displace;
            if (n == 0) {
                info.acceptance = 0.0;
            } else {
                const std::size_t i = rng_.below(n);
                Point y = config_[i].x;
                bool inside = true;
                for (int d = 0; d < p_.region.dim; ++d) y[d] += rng_.uniform(-p_.displacement, p_.displacement);
                if (p_.region.periodic())
                    y = p_.region.wrap(y);
                else
                    inside = p_.region.contains(y);
                if (!inside) {
                    info.acceptance = 0.0;
                } else {
                    info.delta_u = delta_displace(i, y);
                    info.acceptance = acceptance(1.0, info.delta_u);
                    if (rng_.uniform() < info.acceptance) {
                        commit_displace(i, y, info.delta_u);
                        info.accepted = true;
                    }
                }
            }
        }
        if (!info.accepted) reject_pending();
        if (p_.resync_interval && steps_ % p_.resync_interval == 0) resync();
        return info;
    }

    /// Recomputes the cached field and energy; throws when the drift exceeds the tolerance.
    double resync() {
        if (model_ == Model::grid) rebuild_field();
        const double fresh = energy_from_scratch();
        double drift = 0.0;
        if (std::isfinite(fresh) && std::isfinite(u_)) drift = std::abs(fresh - u_);
        else if (std::isinf(fresh) != std::isinf(u_)) drift = kInf;
        u_ = fresh;
        if (drift > p_.resync_tolerance * std::max(1.0, std::abs(fresh)))
            throw ConsistencyError("energy cache drifted by " + std::to_string(drift));
        return drift;
    }

private:
    enum class Model { grid, pair_sum, hard_core };

    [[nodiscard]] double acceptance(double prefactor, double du) const {
        if (p_.beta == 0.0) return std::min(1.0, prefactor);
        if (std::isinf(du) && du > 0) return 0.0;
        return std::min(1.0, prefactor * std::exp(-p_.beta * du));
    }

    [[nodiscard]] double grid_energy(const std::vector<double>& f) const {
        double u = 0.0;
        const auto& v = p_.density;
        for (std::size_t k = 0; k < f.size(); ++k) u += weights_[k] * v(f[k]);
        return u;
    }

    void rebuild_field() {
        std::fill(field_.begin(), field_.end(), 0.0);
        for (const auto& q : config_.particles())
            grid_.for_each_near(q.x, kernel_.truncation(), [&](std::size_t k, double r) { field_[k] += q.s * kernel_(r); });
    }

    [[nodiscard]] double energy_from_scratch() const {
        if (model_ == Model::grid) return grid_energy(field_);
        return energy_of(config_);
    }

    // Accumulates the field change of a move into scratch_ and returns the energy change.
    void add_to_scratch(const Point& y, double s) {
        grid_.for_each_near(y, kernel_.truncation(), [&](std::size_t k, double r) {
            if (scratch_[k] == 0.0) touched_.push_back(k);
            scratch_[k] += s * kernel_(r);
            if (scratch_[k] == 0.0) scratch_[k] = 1e-300;  // keep the entry registered
        });
    }
    double scratch_delta() {
        double du = 0.0;
        const auto& v = p_.density;
        for (std::size_t k : touched_) du += weights_[k] * (v(field_[k] + scratch_[k]) - v(field_[k]));
        return du;
    }
    void clear_scratch(bool apply) {
        for (std::size_t k : touched_) {
            if (apply) field_[k] += scratch_[k];
            scratch_[k] = 0.0;
        }
        touched_.clear();
    }

    double pair_interaction(const Point& y, double s, long skip) const {
        double w = 0.0;
        for (std::size_t j = 0; j < config_.size(); ++j) {
            if (static_cast<long>(j) == skip) continue;
            const double r = p_.region.periodic() ? p_.region.distance(y, config_[j].x) : distance(y, config_[j].x, config_.dim());
            w += 2.0 * s * config_[j].s * phi_(r);
        }
        return w;
    }

    double delta_birth(const Particle& q) {
        switch (model_) {
            case Model::grid:
                add_to_scratch(q.x, q.s);
                return scratch_delta();
            case Model::pair_sum: return pair_interaction(q.x, q.s, -1);
            case Model::hard_core: {
                if (std::isinf(u_)) return 0.0;
                auto pts = positions(config_);
                pts.push_back(q.x);
                MarkedConfiguration probe = config_;
                probe.add(q);
                detail::check_hard_core_inputs(probe, p_.kernel);
                const bool hit = detail::balls_share_point(pts, config_.dim(), p_.kernel.radius,
                                                           detail::hard_core_multiplicity(p_.density, q.s),
                                                           &p_.region, static_cast<long>(pts.size() - 1));
                return hit ? kInf : 0.0;
            }
        }
        return 0.0;
    }
    void commit_birth(const Particle& q, double du) {
        config_.add(q);
        finish(du);
    }

    double delta_death(std::size_t i) {
        switch (model_) {
            case Model::grid:
                add_to_scratch(config_[i].x, -config_[i].s);
                return scratch_delta();
            case Model::pair_sum: return -pair_interaction(config_[i].x, config_[i].s, static_cast<long>(i));
            case Model::hard_core: return 0.0;
        }
        return 0.0;
    }
    void commit_death(std::size_t i, double du) {
        config_.remove(i);
        finish(du);
    }

    double delta_displace(std::size_t i, const Point& y) {
        switch (model_) {
            case Model::grid:
                add_to_scratch(config_[i].x, -config_[i].s);
                add_to_scratch(y, config_[i].s);
                return scratch_delta();
            case Model::pair_sum:
                return pair_interaction(y, config_[i].s, static_cast<long>(i)) -
                       pair_interaction(config_[i].x, config_[i].s, static_cast<long>(i));
            case Model::hard_core: {
                if (std::isinf(u_)) return 0.0;
                auto pts = positions(config_);
                pts[i] = y;
                const bool hit = detail::balls_share_point(pts, config_.dim(), p_.kernel.radius,
                                                           detail::hard_core_multiplicity(p_.density, config_[i].s),
                                                           &p_.region, static_cast<long>(i));
                return hit ? kInf : 0.0;
            }
        }
        return 0.0;
    }
    void commit_displace(std::size_t i, const Point& y, double du) {
        config_[i].x = y;
        finish(du);
    }

    void finish(double du) {
        if (model_ == Model::grid) clear_scratch(true);
        if (model_ == Model::hard_core) {
            u_ = std::isinf(u_) || std::isinf(du) ? energy_of(config_) : u_;
        } else {
            u_ += du;
        }
    }

public:
    /// Discards a rejected proposal's scratch state (called by step()).
    void reject_pending() {
        if (model_ == Model::grid) clear_scratch(false);
    }

private:
    GcmcParams p_;
    Kernel kernel_;
    RngStream rng_;
    MarkedConfiguration config_;
    Model model_ = Model::grid;
    PairPotential phi_;
    NodeGrid grid_;
    std::vector<double> field_, scratch_, weights_;
    std::vector<std::size_t> touched_;
    double u_ = 0.0;
    double pb_ = 0.35, pd_ = 0.35;
    std::size_t steps_ = 0;
};

/// Burn-in, then one emitted sample every `thinning` steps. `on_sample(chain, index)`.
template <class F>
ChainSummary run(GcmcChain& chain, std::size_t n_samples, F&& on_sample) {
    ChainSummary s;
    const auto& p = chain.params();
    auto tally = [&](const StepInfo& info) {
        const int t = static_cast<int>(info.type);
        ++s.proposed[t];
        s.accepted[t] += info.accepted;
    };
    for (std::size_t i = 0; i < p.burn_in; ++i) tally(chain.step());
    std::vector<double> ns, us;
    ns.reserve(n_samples);
    us.reserve(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        for (std::size_t i = 0; i < p.thinning; ++i) tally(chain.step());
        ns.push_back(static_cast<double>(chain.config().size()));
        us.push_back(chain.energy());
        on_sample(static_cast<const GcmcChain&>(chain), k);
    }
    s.steps = chain.steps();
    s.mean_n = batch_means(ns);
    s.mean_u = batch_means(us);
    return s;
}

inline ChainSummary run(GcmcChain& chain, std::size_t n_samples) {
    return run(chain, n_samples, [](const GcmcChain&, std::size_t) {});
}

/// Energy U(eta) of an inserted configuration and its mutual energy W with
/// the chain's current configuration, under the chain's energy model.
class InsertionProbe {
public:
    InsertionProbe(const GcmcChain& chain, const MarkedConfiguration& eta) : chain_(chain), eta_(eta) {
        const auto& p = chain.params();
        if (chain.uses_grid()) {
            const NodeGrid& g = chain.grid();
            dense_.assign(g.size(), 0.0);
            const Kernel& k = chain.kernel();
            for (const auto& q : eta.particles())
                g.for_each_near(q.x, k.truncation(), [&](std::size_t i, double r) {
                    if (dense_[i] == 0.0) touched_.push_back(i);
                    dense_[i] += q.s * k(r);
                    if (dense_[i] == 0.0) dense_[i] = 1e-300;
                });
            std::sort(touched_.begin(), touched_.end());
            const double v0 = p.density(0.0);
            double total = 0.0, u = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) total += g.weight(i);
            u = v0 * total;
            for (std::size_t i : touched_) u += g.weight(i) * (p.density(dense_[i]) - v0);
            u_eta_ = u;
        } else {
            u_eta_ = chain.energy_of(eta);
        }
    }

    [[nodiscard]] double u_eta() const { return u_eta_; }

    /// W(eta, current configuration).
    [[nodiscard]] double mutual() const {
        const auto& p = chain_.params();
        const auto& gamma = chain_.config();
        if (gamma.empty() || eta_.empty()) return 0.0;
        if (chain_.uses_grid()) {
            const NodeGrid& g = chain_.grid();
            const auto& xf = chain_.node_field();
            double w = 0.0;
            for (std::size_t i : touched_) {
                const double a = dense_[i], b = xf[i];
                w += g.weight(i) * (p.density(a + b) - p.density(a) - p.density(b));
            }
            return w;
        }
        if (p.density.kind == DensityKind::hard_core) {
            const double joint = chain_.energy_of(eta_.united(gamma));
            return std::isinf(joint) && std::isfinite(u_eta_) && std::isfinite(chain_.energy()) ? kInf : 0.0;
        }
        const PairPotential phi(p.kernel);
        double w = 0.0;
        for (const auto& a : eta_.particles())
            for (const auto& b : gamma.particles()) {
                const double r = p.region.periodic() ? p.region.distance(a.x, b.x) : distance(a.x, b.x, eta_.dim());
                w += 2.0 * a.s * b.s * phi(r);
            }
        return w;
    }

private:
    const GcmcChain& chain_;
    const MarkedConfiguration& eta_;
    std::vector<double> dense_;
    std::vector<std::size_t> touched_;
    double u_eta_ = 0.0;
};

inline double boltzmann(double beta, double u) {
    if (beta == 0.0) return 1.0;
    return std::exp(-beta * u);
}

struct RhoEstimate {
    EstimatorResult result;
    double u_eta = 0.0;
    double stability = kInf;  ///< B, infinite when not applicable
    double ruelle_bound = kInf;
    bool ruelle_ok = true;
};

inline void require_inside(const MarkedConfiguration& eta, const Region& region) {
    for (const auto& q : eta.particles())
        if (!region.contains(q.x)) throw std::domain_error("configuration point outside the region");
}

/// Widom insertion: rho(eta) = e^{-beta U(eta)} < e^{-beta W(eta, .)} >_Gibbs.
inline RhoEstimate estimate_rho(const MarkedConfiguration& eta, const GcmcParams& p, std::size_t n_samples) {
    require_inside(eta, p.region);
    RhoEstimate out;
    try {
        out.stability = stability_bound(p.density, p.kernel, p.charges);
    } catch (const NotApplicable&) {
        if (p.density.kind == DensityKind::hard_core) out.stability = 0.0;
    }
    out.ruelle_bound = std::exp(p.beta * out.stability * static_cast<double>(eta.size()));
    GcmcChain chain(p);
    InsertionProbe probe(chain, eta);
    out.u_eta = probe.u_eta();
    const double front = boltzmann(p.beta, out.u_eta);
    std::vector<double> vals;
    vals.reserve(n_samples);
    if (p.beta == 0.0) {
        vals.assign(n_samples, 1.0);
    } else {
        run(chain, n_samples, [&](const GcmcChain&, std::size_t) {
            const double w = probe.mutual();
            vals.push_back(front == 0.0 ? 0.0 : front * boltzmann(p.beta, w));
        });
    }
    out.result = batch_means(vals);
    out.ruelle_ok = std::abs(out.result.mean) <= out.ruelle_bound + 3.0 * out.result.stderr();
    if (!out.ruelle_ok) out.result.warnings.push_back("Ruelle bound exceeded");
    return out;
}

/// Characteristic functional of the interacting field,
/// E[e^{iX(eta)} e^{-beta V_Lambda}] / E[e^{-beta V_Lambda}], by reweighting
/// i.i.d. free noise samples. X(eta) = sum_j alpha_j X(y_j).
inline EstimatorResult estimate_char_functional(const MarkedConfiguration& eta, const GcmcParams& p,
                                                std::size_t n_samples, double min_ess_fraction = 0.1) {
    p.validate();
    const Kernel kernel(p.kernel);
    const double rt = kernel.truncation();
    Region ext = p.region;
    if (!p.region.periodic()) {
        for (const auto& q : eta.particles())
            for (int i = 0; i < p.region.dim; ++i) {
                ext.lo[i] = std::min(ext.lo[i], q.x[i]);
                ext.hi[i] = std::max(ext.hi[i], q.x[i]);
            }
        ext = ext.expanded(rt);
    }
    const bool interacting = p.beta != 0.0;
    NodeGrid grid;
    if (interacting) grid = NodeGrid(p.region, p.panel > 0 ? p.panel : default_panel(p.kernel), p.order);
    std::vector<double> field(grid.size(), 0.0), weights(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) weights[k] = grid.weight(k);
    const Region* metric = p.region.periodic() ? &p.region : nullptr;
    RngStream rng(p.seed, p.chain, 1);
    std::vector<cplx> a;
    std::vector<double> w;
    a.reserve(n_samples);
    w.reserve(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const MarkedConfiguration f = sample_free(ext, p.z, p.charges, rng);
        double x = 0.0;
        for (const auto& q : eta.particles()) x += q.s * eval_field_at(f, kernel, q.x, metric);
        a.push_back(std::isfinite(x) ? std::polar(1.0, x) : cplx{0.0, 0.0});
        if (!interacting) {
            w.push_back(1.0);
            continue;
        }
        std::fill(field.begin(), field.end(), 0.0);
        for (const auto& q : f.particles())
            grid.for_each_near(q.x, rt, [&](std::size_t k, double r) { field[k] += q.s * kernel(r); });
        double v = 0.0;
        for (std::size_t k = 0; k < field.size(); ++k) v += weights[k] * p.density(field[k]);
        w.push_back(boltzmann(p.beta, v));
    }
    EstimatorResult r = ratio_estimate(a, w);
    if (r.ess < min_ess_fraction * static_cast<double>(n_samples))
        r.warnings.push_back("effective sample size " + std::to_string(static_cast<long>(r.ess)) + " below threshold");
    return r;
}

/// Gibbs averages of the prefix products prod_{j<=k} <F, f_j>, k = 1..l.
inline std::vector<EstimatorResult> estimate_moments(const std::vector<TestProfile>& profiles, const GcmcParams& p,
                                                     std::size_t n_samples) {
    GcmcChain chain(p);
    std::vector<std::vector<double>> vals(profiles.size());
    run(chain, n_samples, [&](const GcmcChain& c, std::size_t) {
        double prod = 1.0;
        for (std::size_t j = 0; j < profiles.size(); ++j) {
            double s = 0.0;
            for (const auto& q : c.config().particles()) s += q.s * profiles[j](q.x);
            prod *= s;
            vals[j].push_back(prod);
        }
    });
    std::vector<EstimatorResult> out;
    for (const auto& v : vals) out.push_back(batch_means(v));
    return out;
}

}  // namespace cpn
