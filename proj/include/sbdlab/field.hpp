#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbdlab {

/// Thrown when two objects that must share a grid were built on different ones.
class DomainMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Periodic box [0,L)^d, d in {1,2}, discretised by M points per axis.
///
/// Grid point with multi-index (i) or (i,j) sits at coordinate i*(L/M) per
/// axis and owns a cell of volume (L/M)^d; sums over grid points times the
/// cell volume are the quadrature rule used throughout.
class TorusDomain {
public:
    TorusDomain(int dim, double edge, int points_per_axis)
        : dim_(dim), edge_(edge), points_(points_per_axis) {
        if (dim_ != 1 && dim_ != 2)
            throw std::invalid_argument("TorusDomain: dim must be 1 or 2, got " + std::to_string(dim_));
        if (!(edge_ > 0.0) || !std::isfinite(edge_))
            throw std::invalid_argument("TorusDomain: edge length must be positive and finite");
        if (points_ < 2)
            throw std::invalid_argument("TorusDomain: need at least 2 points per axis");
    }

    int dim() const { return dim_; }
    double edge() const { return edge_; }
    int points_per_axis() const { return points_; }

    double spacing() const { return edge_ / points_; }
    double cell_volume() const {
        const double h = spacing();
        return dim_ == 1 ? h : h * h;
    }
    double volume() const { return dim_ == 1 ? edge_ : edge_ * edge_; }

    /// Number of grid points (M in d=1, M^2 in d=2).
    std::size_t size() const {
        return dim_ == 1 ? static_cast<std::size_t>(points_)
                         : static_cast<std::size_t>(points_) * points_;
    }

    std::size_t flat_index(int i, int j = 0) const {
        return dim_ == 1 ? static_cast<std::size_t>(i)
                         : static_cast<std::size_t>(i) * points_ + j;
    }

    /// Coordinate of axis index i mapped to the symmetric representative in [-L/2, L/2).
    double signed_coordinate(int i) const {
        const int half = points_ / 2;
        const int k = i <= half ? i : i - points_;
        return k * spacing();
    }

    /// Wrap a coordinate into [0, L).
    double wrap(double x) const {
        double y = std::fmod(x, edge_);
        if (y < 0.0) y += edge_;
        if (y >= edge_) y = 0.0;  // fmod can round up to edge_
        return y;
    }

    /// Signed displacement folded to the minimum-image representative in [-L/2, L/2].
    double min_image(double dx) const {
        double y = std::remainder(dx, edge_);
        return y;
    }

    /// Torus (minimum-image) distance between two points given per-axis coordinates.
    double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) const {
        if (dim_ == 1) return std::abs(min_image(a[0] - b[0]));
        const double dx = min_image(a[0] - b[0]);
        const double dy = min_image(a[1] - b[1]);
        return std::sqrt(dx * dx + dy * dy);
    }

    bool operator==(const TorusDomain& o) const {
        return dim_ == o.dim_ && edge_ == o.edge_ && points_ == o.points_;
    }
    bool operator!=(const TorusDomain& o) const { return !(*this == o); }

private:
    int dim_;
    double edge_;
    int points_;
};

inline void require_same_domain(const TorusDomain& a, const TorusDomain& b, const char* what) {
    if (a != b)
        throw DomainMismatchError(std::string(what) + ": operands live on different grids");
}

/// Scalar field sampled on the grid of a TorusDomain (row-major in d=2).
struct DensityField {
    TorusDomain domain;
    std::vector<double> values;

    explicit DensityField(const TorusDomain& dom)
        : domain(dom), values(dom.size(), 0.0) {}

    DensityField(const TorusDomain& dom, std::vector<double> v)
        : domain(dom), values(std::move(v)) {
        if (values.size() != domain.size())
            throw std::invalid_argument("DensityField: value count does not match grid size");
    }

    static DensityField constant(const TorusDomain& dom, double c) {
        DensityField f(dom);
        for (double& v : f.values) v = c;
        return f;
    }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double max() const {
        double m = values.empty() ? 0.0 : values[0];
        for (double v : values) m = std::max(m, v);
        return m;
    }
    double min() const {
        double m = values.empty() ? 0.0 : values[0];
        for (double v : values) m = std::min(m, v);
        return m;
    }
    double sup_norm() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double mean() const {
        if (values.empty()) return 0.0;
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
};

}  // namespace sbdlab
