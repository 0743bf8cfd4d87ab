#pragma once

// Points, boxes and marked configurations in dimensions 1 to 3.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpn {

/// Spatial point; coordinates beyond the working dimension are zero.
using Point = std::array<double, 3>;

inline double squared_norm(const Point& a, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += a[i] * a[i];
    return s;
}

inline double distance(const Point& a, const Point& b, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return std::sqrt(s);
}

inline void check_dimension(int dim) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("spatial dimension must be 1, 2 or 3");
}

enum class Boundary { open, periodic };

/// Axis-aligned box with an optional periodic identification of opposite faces.
struct Region {
    int dim = 2;
    Point lo{0.0, 0.0, 0.0};
    Point hi{1.0, 1.0, 1.0};
    Boundary boundary = Boundary::open;

    static Region box(int dim, double lo, double hi, Boundary b = Boundary::open) {
        check_dimension(dim);
        Region r;
        r.dim = dim;
        r.boundary = b;
        for (int i = 0; i < 3; ++i) {
            r.lo[i] = i < dim ? lo : 0.0;
            r.hi[i] = i < dim ? hi : 0.0;
        }
        r.validate();
        return r;
    }

    void validate() const {
        check_dimension(dim);
        for (int i = 0; i < dim; ++i)
            if (!(hi[i] > lo[i])) throw std::invalid_argument("region: empty box");
    }

    [[nodiscard]] bool periodic() const { return boundary == Boundary::periodic; }

    [[nodiscard]] double length(int i) const { return hi[i] - lo[i]; }

    [[nodiscard]] double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
        return v;
    }

    [[nodiscard]] bool contains(const Point& p) const {
        for (int i = 0; i < dim; ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }

    /// Box grown by `margin` on every side, always open.
    [[nodiscard]] Region expanded(double margin) const {
        Region r = *this;
        r.boundary = Boundary::open;
        for (int i = 0; i < dim; ++i) {
            r.lo[i] -= margin;
            r.hi[i] += margin;
        }
        return r;
    }

    /// a - b, reduced to the minimum image when periodic.
    [[nodiscard]] Point displacement(const Point& a, const Point& b) const {
        Point d{0.0, 0.0, 0.0};
        for (int i = 0; i < dim; ++i) {
            d[i] = a[i] - b[i];
            if (periodic()) {
                const double L = hi[i] - lo[i];
                d[i] -= L * std::round(d[i] / L);
            }
        }
        return d;
    }

    [[nodiscard]] double distance(const Point& a, const Point& b) const {
        return std::sqrt(squared_norm(displacement(a, b), dim));
    }

    /// Maps a point into the box (periodic) or leaves it unchanged.
    [[nodiscard]] Point wrap(Point p) const {
        if (!periodic()) return p;
        for (int i = 0; i < dim; ++i) {
            const double L = hi[i] - lo[i];
            p[i] = lo[i] + (p[i] - lo[i]) - L * std::floor((p[i] - lo[i]) / L);
            if (p[i] >= hi[i]) p[i] = lo[i];
        }
        return p;
    }

    /// Lattice translations needed to cover every image within `reach` of the box.
    [[nodiscard]] std::vector<Point> image_shifts(double reach) const {
        std::vector<Point> shifts;
        if (!periodic()) {
            shifts.push_back({0.0, 0.0, 0.0});
            return shifts;
        }
        std::array<int, 3> k{0, 0, 0};
        for (int i = 0; i < dim; ++i) k[i] = static_cast<int>(std::ceil(reach / length(i)));
        for (int a = -k[0]; a <= k[0]; ++a)
            for (int b = -k[1]; b <= k[1]; ++b)
                for (int c = -k[2]; c <= k[2]; ++c)
                    shifts.push_back({a * length(0), b * length(1), c * length(2)});
        return shifts;
    }

    bool operator==(const Region&) const = default;
};

/// A charged point y with charge s.
struct Particle {
    Point x{0.0, 0.0, 0.0};
    double s = 1.0;
    bool operator==(const Particle&) const = default;
};

/// Finite marked configuration eta = sum_j s_j delta_{y_j}.
class MarkedConfiguration {
public:
    explicit MarkedConfiguration(int dim = 2) : dim_(dim) { check_dimension(dim); }
    MarkedConfiguration(int dim, std::vector<Particle> pts) : dim_(dim), pts_(std::move(pts)) {
        check_dimension(dim);
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] std::size_t size() const { return pts_.size(); }
    [[nodiscard]] bool empty() const { return pts_.empty(); }
    [[nodiscard]] const std::vector<Particle>& particles() const { return pts_; }
    [[nodiscard]] std::vector<Particle>& particles() { return pts_; }
    const Particle& operator[](std::size_t i) const { return pts_[i]; }
    Particle& operator[](std::size_t i) { return pts_[i]; }

    void add(const Point& x, double s) { pts_.push_back({x, s}); }
    void add(const Particle& p) { pts_.push_back(p); }

    /// Removes particle i by swapping with the last one.
    void remove(std::size_t i) {
        pts_[i] = pts_.back();
        pts_.pop_back();
    }

    [[nodiscard]] MarkedConfiguration united(const MarkedConfiguration& other) const {
        MarkedConfiguration u = *this;
        u.pts_.insert(u.pts_.end(), other.pts_.begin(), other.pts_.end());
        return u;
    }

    [[nodiscard]] MarkedConfiguration restricted(const Region& region) const {
        MarkedConfiguration r(dim_);
        for (const auto& p : pts_)
            if (region.contains(p.x)) r.add(p);
        return r;
    }

    [[nodiscard]] MarkedConfiguration scaled_charges(double f) const {
        MarkedConfiguration r = *this;
        for (auto& p : r.pts_) p.s *= f;
        return r;
    }

    [[nodiscard]] double total_charge() const {
        double q = 0.0;
        for (const auto& p : pts_) q += p.s;
        return q;
    }

    [[nodiscard]] double min_pair_distance() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pts_.size(); ++i)
            for (std::size_t j = i + 1; j < pts_.size(); ++j)
                m = std::min(m, distance(pts_[i].x, pts_[j].x, dim_));
        return m;
    }

    [[nodiscard]] bool positions_distinct() const { return min_pair_distance() > 0.0; }

    bool operator==(const MarkedConfiguration&) const = default;

    /// CSV with header "x1,...,xd,s".
    void write_csv(std::ostream& os) const {
        for (int i = 0; i < dim_; ++i) os << 'x' << (i + 1) << ',';
        os << "s\n";
        os << std::setprecision(17);
        for (const auto& p : pts_) {
            for (int i = 0; i < dim_; ++i) os << p.x[i] << ',';
            os << p.s << '\n';
        }
    }

    static MarkedConfiguration read_csv(std::istream& is) {
        std::string line;
        if (!std::getline(is, line)) throw std::runtime_error("configuration csv: missing header");
        const int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
        const int dim = cols - 1;
        MarkedConfiguration c(dim);
        int lineno = 1;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            Particle p;
            for (int i = 0; i < dim; ++i) ls >> p.x[i];
            ls >> p.s;
            if (!ls) throw std::runtime_error("configuration csv: bad row at line " + std::to_string(lineno));
            c.add(p);
        }
        return c;
    }

private:
    int dim_;
    std::vector<Particle> pts_;
};

}  // namespace cpn
