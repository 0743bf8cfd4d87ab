#pragma once

// Static fields X(x) = sum_l s_l G(x - y_l) of charge configurations: point
// evaluation, rasterisation on cell-centred grids, level-set volumes and
// marching-squares contour lengths.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cpn/geometry.hpp"
#include "cpn/kernels.hpp"

namespace cpn {

/// Field at x. Returns +-infinity when x coincides with a particle of a
/// kernel that diverges at the origin (sign of the net coincident charge).
/// Periodic regions sum over all images within the truncation radius.
inline double eval_field_at(const MarkedConfiguration& config, const Kernel& kernel, const Point& x,
                            const Region* region = nullptr) {
    const int dim = config.dim();
    const double rt = kernel.truncation();
    double sum = 0.0, singular = 0.0;
    const bool periodic = region && region->periodic();
    const std::vector<Point> shifts = periodic ? region->image_shifts(rt) : std::vector<Point>{{0.0, 0.0, 0.0}};
    for (const auto& p : config.particles()) {
        for (const auto& sh : shifts) {
            double r2 = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double t = x[i] - p.x[i] - sh[i];
                r2 += t * t;
            }
            if (r2 > rt * rt) continue;
            if (r2 == 0.0 && kernel.diverges()) {
                singular += p.s;
                continue;
            }
            sum += p.s * kernel(std::sqrt(r2));
        }
    }
    if (singular != 0.0) return singular > 0.0 ? kInf : -kInf;
    return sum;
}

/// Cell-centred raster of a field over a box.
struct FieldGrid {
    Region region;
    std::array<int, 3> n{1, 1, 1};
    std::vector<double> values;
    std::vector<std::int8_t> singular;  ///< +1 / -1: cell holds a positive / negative singular charge

    FieldGrid() = default;
    FieldGrid(const Region& reg, std::array<int, 3> cells) : region(reg), n(cells) {
        for (int i = reg.dim; i < 3; ++i) n[i] = 1;
        for (int i = 0; i < reg.dim; ++i)
            if (n[i] < 2) throw std::invalid_argument("grid resolution must be >= 2 per axis");
        values.assign(static_cast<std::size_t>(n[0]) * n[1] * n[2], 0.0);
        singular.assign(values.size(), 0);
    }

    [[nodiscard]] int dim() const { return region.dim; }
    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] double spacing(int i) const { return region.length(i) / n[i]; }
    [[nodiscard]] double cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= spacing(i);
        return v;
    }
    /// Row-major index with the first axis varying fastest.
    [[nodiscard]] std::size_t index(int a, int b = 0, int c = 0) const {
        return static_cast<std::size_t>(a) + static_cast<std::size_t>(n[0]) * (b + static_cast<std::size_t>(n[1]) * c);
    }
    [[nodiscard]] Point center(int a, int b = 0, int c = 0) const {
        Point p{0.0, 0.0, 0.0};
        const std::array<int, 3> idx{a, b, c};
        for (int i = 0; i < dim(); ++i) p[i] = region.lo[i] + (idx[i] + 0.5) * spacing(i);
        return p;
    }
    double& at(int a, int b = 0, int c = 0) { return values[index(a, b, c)]; }
    [[nodiscard]] double at(int a, int b = 0, int c = 0) const { return values[index(a, b, c)]; }

    /// Header "nx ny x0 y0 dx dy" (d = 2; d = 1 uses ny = 1, dy = 0; d = 3
    /// writes "nx ny nz x0 y0 z0 dx dy dz") followed by rows of values.
    void write(std::ostream& os) const {
        os.precision(17);
        if (dim() == 3) {
            os << n[0] << ' ' << n[1] << ' ' << n[2] << ' ' << region.lo[0] << ' ' << region.lo[1] << ' '
               << region.lo[2] << ' ' << spacing(0) << ' ' << spacing(1) << ' ' << spacing(2) << '\n';
        } else {
            os << n[0] << ' ' << n[1] << ' ' << region.lo[0] << ' ' << (dim() > 1 ? region.lo[1] : 0.0) << ' '
               << spacing(0) << ' ' << (dim() > 1 ? spacing(1) : 0.0) << '\n';
        }
        for (int c = 0; c < n[2]; ++c)
            for (int b = 0; b < n[1]; ++b) {
                for (int a = 0; a < n[0]; ++a) os << (a ? " " : "") << at(a, b, c);
                os << '\n';
            }
    }

    /// Reads a two-dimensional grid written by write().
    static FieldGrid read2d(std::istream& is) {
        int nx = 0, ny = 0;
        double x0, y0, dx, dy;
        if (!(is >> nx >> ny >> x0 >> y0 >> dx >> dy)) throw std::runtime_error("grid file: bad header");
        Region r;
        r.dim = ny > 1 ? 2 : 1;
        r.lo = {x0, y0, 0.0};
        r.hi = {x0 + nx * dx, y0 + ny * dy, 0.0};
        FieldGrid g(r, {nx, ny, 1});
        for (auto& v : g.values)
            if (!(is >> v)) throw std::runtime_error("grid file: truncated values");
        return g;
    }
};

/// Rasterises the field of `config` at the cell centres of `region`. Each
/// particle only visits cells within the truncation radius; periodic regions
/// add every image. Cells whose box contains a particle of a diverging kernel
/// are flagged singular with the sign of their net charge.
inline FieldGrid superpose(const MarkedConfiguration& config, const Kernel& kernel, const Region& region,
                           std::array<int, 3> cells) {
    FieldGrid g(region, cells);
    const int dim = region.dim;
    const double rt = kernel.truncation();
    const std::vector<Point> shifts = region.image_shifts(rt);
    std::vector<double> net(g.size(), 0.0);
    for (const auto& p : config.particles()) {
        if (kernel.diverges() && region.contains(p.x)) {
            std::array<int, 3> idx{0, 0, 0};
            for (int i = 0; i < dim; ++i)
                idx[i] = std::clamp(static_cast<int>(std::floor((p.x[i] - region.lo[i]) / g.spacing(i))), 0, g.n[i] - 1);
            net[g.index(idx[0], idx[1], idx[2])] += p.s;
        }
        for (const auto& sh : shifts) {
            Point y = p.x;
            for (int i = 0; i < dim; ++i) y[i] += sh[i];
            std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
            bool empty = false;
            for (int i = 0; i < dim; ++i) {
                const double h = g.spacing(i);
                lo[i] = std::max(0, static_cast<int>(std::ceil((y[i] - rt - region.lo[i]) / h - 0.5)));
                hi[i] = std::min(g.n[i] - 1, static_cast<int>(std::floor((y[i] + rt - region.lo[i]) / h - 0.5)));
                if (lo[i] > hi[i]) empty = true;
            }
            if (empty) continue;
            for (int c = lo[2]; c <= hi[2]; ++c)
                for (int b = lo[1]; b <= hi[1]; ++b)
                    for (int a = lo[0]; a <= hi[0]; ++a) {
                        const Point x = g.center(a, b, c);
                        double r2 = 0.0;
                        for (int i = 0; i < dim; ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
                        if (r2 > rt * rt) continue;
                        double v = kernel(std::sqrt(r2));
                        if (std::isinf(v)) v = 0.0;  // exact hit: carried by the singular flag
                        g.values[g.index(a, b, c)] += p.s * v;
                    }
        }
    }
    for (std::size_t k = 0; k < g.size(); ++k)
        if (net[k] != 0.0) g.singular[k] = net[k] > 0.0 ? 1 : -1;
    return g;
}

enum class ThresholdMode { above, abs_above, band };

/// Cell-counting volume of {X >= C} (above), {|X| >= C} (abs_above) or
/// {X <= -C} (band). Singular cells count when their sign reaches the level.
inline double threshold_volume(const FieldGrid& g, double C, ThresholdMode mode = ThresholdMode::above) {
    if (mode != ThresholdMode::band && !(C > 0.0)) throw std::invalid_argument("threshold level must be > 0");
    std::size_t count = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double x = g.values[k];
        const int s = g.singular[k];
        bool hit = false;
        switch (mode) {
            case ThresholdMode::above: hit = s > 0 || (s == 0 && x >= C); break;
            case ThresholdMode::abs_above: hit = s != 0 || std::abs(x) >= C; break;
            case ThresholdMode::band: hit = s < 0 || (s == 0 && x <= -C); break;
        }
        count += hit;
    }
    return static_cast<double>(count) * g.cell_volume();
}

/// Total length of the level curve {X = C} of a two-dimensional grid by
/// marching squares on the lattice of cell centres, with linear
/// interpolation along edges and saddles resolved by the mean of the corners.
inline double contour_length(const FieldGrid& g, double C) {
    if (g.dim() != 2) throw std::invalid_argument("contour_length requires a two-dimensional grid");
    const bool periodic = g.region.periodic();
    const int nx = g.n[0], ny = g.n[1];
    const double hx = g.spacing(0), hy = g.spacing(1);
    auto value = [&](int a, int b) {
        const std::size_t k = g.index(((a % nx) + nx) % nx, ((b % ny) + ny) % ny);
        if (g.singular[k] != 0) return g.singular[k] * 1e300;
        return g.values[k];
    };
    double total = 0.0;
    const int ax = periodic ? nx : nx - 1, bx = periodic ? ny : ny - 1;
    for (int b = 0; b < bx; ++b)
        for (int a = 0; a < ax; ++a) {
            // corners counter-clockwise from (a,b)
            const double v[4] = {value(a, b), value(a + 1, b), value(a + 1, b + 1), value(a, b + 1)};
            const double px[4] = {0.0, hx, hx, 0.0}, py[4] = {0.0, 0.0, hy, hy};
            int mask = 0;
            for (int k = 0; k < 4; ++k)
                if (v[k] >= C) mask |= 1 << k;
            if (mask == 0 || mask == 15) continue;
            // crossing point on edge k (corner k to k+1)
            auto cross = [&](int k, double& x, double& y) {
                const int j = (k + 1) % 4;
                double t = (C - v[k]) / (v[j] - v[k]);
                t = std::clamp(t, 0.0, 1.0);
                x = px[k] + t * (px[j] - px[k]);
                y = py[k] + t * (py[j] - py[k]);
            };
            auto seg = [&](int e1, int e2) {
                double x1, y1, x2, y2;
                cross(e1, x1, y1);
                cross(e2, x2, y2);
                total += std::hypot(x2 - x1, y2 - y1);
            };
            std::vector<int> edges;
            for (int k = 0; k < 4; ++k) {
                const bool in1 = (mask >> k) & 1, in2 = (mask >> ((k + 1) % 4)) & 1;
                if (in1 != in2) edges.push_back(k);
            }
            if (edges.size() == 2) {
                seg(edges[0], edges[1]);
            } else {
                // saddle: corners 0,2 on one side, 1,3 on the other
                const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                const bool centre_in = centre >= C;
                const bool zero_in = mask & 1;
                if (centre_in == zero_in) {
                    // corner 0 connects through the centre to corner 2: cut off corners 1 and 3
                    seg(0, 1);
                    seg(2, 3);
                } else {
                    seg(3, 0);
                    seg(1, 2);
                }
            }
        }
    return total;
}

}  // namespace cpn
