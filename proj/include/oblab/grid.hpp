#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "oblab/error.hpp"

namespace oblab {

/// Points always carry three coordinates; trailing ones are zero for 2D grids.
using Point = std::array<double, 3>;

inline double norm(const Point& x, int dim) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += x[d] * x[d];
    return std::sqrt(s);
}

inline double distance(const Point& a, const Point& b, int dim) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

/// Uniform vertex grid over [-1,1]^n. N is odd so the origin is a vertex.
struct GridSpec {
    int dim = 2;
    int points = 129;

    static constexpr int min_points = 33;

    GridSpec() = default;
    GridSpec(int dim_, int points_) : dim(dim_), points(points_) { validate(); }

    void validate() const {
        if (dim != 2 && dim != 3)
            throw Error(ErrorKind::parameter, "grid dimension must be 2 or 3, got " + std::to_string(dim));
        if (points < min_points || points % 2 == 0)
            throw Error(ErrorKind::parameter,
                        "points per axis must be odd and >= 33, got " + std::to_string(points));
    }

    double spacing() const { return 2.0 / static_cast<double>(points - 1); }

    std::size_t size() const {
        std::size_t s = 1;
        for (int d = 0; d < dim; ++d) s *= static_cast<std::size_t>(points);
        return s;
    }

    double coordinate(int i) const { return -1.0 + spacing() * i; }

    /// Row-major: the first axis varies slowest.
    std::size_t index(const std::array<int, 3>& ijk) const {
        std::size_t idx = 0;
        for (int d = 0; d < dim; ++d) idx = idx * points + static_cast<std::size_t>(ijk[d]);
        return idx;
    }

    std::array<int, 3> multi_index(std::size_t idx) const {
        std::array<int, 3> ijk{0, 0, 0};
        for (int d = dim - 1; d >= 0; --d) {
            ijk[d] = static_cast<int>(idx % points);
            idx /= points;
        }
        return ijk;
    }

    Point vertex(std::size_t idx) const {
        const auto ijk = multi_index(idx);
        Point x{0.0, 0.0, 0.0};
        for (int d = 0; d < dim; ++d) x[d] = coordinate(ijk[d]);
        return x;
    }

    std::size_t stride(int axis) const {
        std::size_t s = 1;
        for (int d = dim - 1; d > axis; --d) s *= static_cast<std::size_t>(points);
        return s;
    }

    bool is_interior(const std::array<int, 3>& ijk) const {
        for (int d = 0; d < dim; ++d)
            if (ijk[d] == 0 || ijk[d] == points - 1) return false;
        return true;
    }

    /// Half-width of the cube on which the cubic interpolant is defined.
    double evaluable_half_width() const { return 1.0 - 2.0 * spacing(); }

    bool operator==(const GridSpec&) const = default;
};

}  // namespace oblab
