#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "oblab/error.hpp"
#include "oblab/field.hpp"
#include "oblab/grid.hpp"

namespace oblab {

/// Compensated running sum; keeps long quadrature loops independent of
/// accumulation drift.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            c_ += (sum_ - t) + x;
        else
            c_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int count) {
    std::vector<double> x(count), w(count);
    for (int i = 0; i < (count + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= count; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = count * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[count - 1 - i] = z;
        w[i] = w[count - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

enum class SphereRule {
    gauss_product,  ///< 3D: Gauss-Legendre in cos(polar) x uniform azimuth
    fibonacci,      ///< 3D: equal-weight Fibonacci lattice
};

struct SphereNode {
    Point x;
    double weight;
};

/// Nodes on the sphere of radius r around center; weights sum to |dB_r|.
struct SphereQuadrature {
    Point center{0.0, 0.0, 0.0};
    double radius = 0.0;
    std::vector<SphereNode> nodes;

    double total_weight() const {
        CompensatedSum s;
        for (const auto& n : nodes) s.add(n.weight);
        return s.value();
    }

    template <class F>
    double integrate(F&& f) const {
        CompensatedSum s;
        for (const auto& n : nodes) s.add(n.weight * f(n.x));
        return s.value();
    }
};

inline double sphere_area(int dim, double r) {
    return dim == 2 ? 2.0 * std::numbers::pi * r : 4.0 * std::numbers::pi * r * r;
}

inline double ball_volume(int dim, double r) {
    return dim == 2 ? std::numbers::pi * r * r : 4.0 / 3.0 * std::numbers::pi * r * r * r;
}

/// Node counts resolve the field at grid scale: 2D max(64, 2*pi*r/h) angles,
/// 3D at least max(256, 4*pi*r^2/h^2) nodes.
inline SphereQuadrature make_sphere(int dim, const Point& center, double r, double h,
                                    SphereRule rule = SphereRule::gauss_product,
                                    double fibonacci_offset = 0.5) {
    SphereQuadrature q;
    q.center = center;
    q.radius = r;
    if (dim == 2) {
        const int count = std::max(64, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / h)));
        const double w = 2.0 * std::numbers::pi * r / count;
        q.nodes.reserve(count);
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / count;
            q.nodes.push_back({Point{center[0] + r * std::cos(th), center[1] + r * std::sin(th), 0.0}, w});
        }
        return q;
    }
    const int target = std::max(256, static_cast<int>(std::ceil(4.0 * std::numbers::pi * r * r / (h * h))));
    if (rule == SphereRule::fibonacci) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        const double w = 4.0 * std::numbers::pi * r * r / target;
        q.nodes.reserve(target);
        for (int i = 0; i < target; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / target;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden * i + 2.0 * std::numbers::pi * fibonacci_offset;
            q.nodes.push_back({Point{center[0] + r * rho * std::cos(phi), center[1] + r * rho * std::sin(phi),
                                     center[2] + r * z},
                               w});
        }
        return q;
    }
    const int polar = std::max(12, static_cast<int>(std::ceil(std::sqrt(target / 2.0))));
    const int azimuth = 2 * polar;
    const auto [zs, ws] = gauss_legendre(polar);
    q.nodes.reserve(static_cast<std::size_t>(polar) * azimuth);
    for (int i = 0; i < polar; ++i) {
        const double rho = std::sqrt(std::max(0.0, 1.0 - zs[i] * zs[i]));
        const double w = ws[i] * (2.0 * std::numbers::pi / azimuth) * r * r;
        for (int k = 0; k < azimuth; ++k) {
            const double phi = 2.0 * std::numbers::pi * (k + 0.5) / azimuth;
            q.nodes.push_back({Point{center[0] + r * rho * std::cos(phi), center[1] + r * rho * std::sin(phi),
                                     center[2] + r * zs[i]},
                               w});
        }
    }
    return q;
}

/// Visits the nodes of the ball rule over B_r(center): concentric spheres at
/// composite 4-point Gauss-Legendre radii with panels no wider than h, which
/// keeps the gap between consecutive shells below h/2. fn(x, weight).
template <class Fn>
void for_each_ball_node(int dim, const Point& center, double r, double h, Fn&& fn) {
    static const auto gl = gauss_legendre(4);
    const int panels = std::max(1, static_cast<int>(std::ceil(r / h - 1e-9)));
    const double width = r / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * width;
        for (int k = 0; k < 4; ++k) {
            const double s = mid + 0.5 * width * gl.first[k];
            const double radial = 0.5 * width * gl.second[k];
            for (const auto& node : make_sphere(dim, center, s, h).nodes) fn(node.x, radial * node.weight);
        }
    }
}

/// Integral of f over B_r(center) with the ball rule above.
template <class F>
double ball_integral(int dim, const Point& center, double r, double h, F&& f) {
    CompensatedSum total;
    for_each_ball_node(dim, center, r, h, [&](const Point& x, double w) { total.add(w * f(x)); });
    return total.value();
}

namespace detail {

inline void require_ball(const ScalarField& v, const Point& x0, double r) {
    const double hh = v.h();
    if (!(r >= 4.0 * hh - 1e-12))
        throw Error(ErrorKind::radius_too_small,
                    "radius " + std::to_string(r) + " below the minimum 4h = " + std::to_string(4.0 * hh));
    if (!v.ball_evaluable(x0, r))
        throw Error(ErrorKind::out_of_domain,
                    "ball of radius " + std::to_string(r) + " leaves the evaluable region");
}

}  // namespace detail

/// Integral of v^2 over the sphere dB_r(x0).
inline double sphere_mean_sq(const ScalarField& v, const Point& x0, double r) {
    detail::require_ball(v, x0, r);
    const auto sphere = make_sphere(v.dim(), x0, r, v.h());
    return sphere.integrate([&](const Point& x) {
        const double f = v.interpolate(x);
        return f * f;
    });
}

/// Integral of |grad v|^2 over the ball B_r(x0).
inline double ball_dirichlet(const ScalarField& v, const Point& x0, double r) {
    detail::require_ball(v, x0, r);
    const int dim = v.dim();
    return ball_integral(dim, x0, r, v.h(), [&](const Point& x) {
        const auto g = v.gradient(x);
        double s = 0.0;
        for (int d = 0; d < dim; ++d) s += g[d] * g[d];
        return s;
    });
}

}  // namespace oblab
