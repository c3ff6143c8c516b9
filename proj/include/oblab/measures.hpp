#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "oblab/error.hpp"
#include "oblab/field.hpp"
#include "oblab/fixtures.hpp"
#include "oblab/quadrature.hpp"

namespace oblab {

// ---------------------------------------------------------------------------
// Coincidence set and free boundary on the grid
// ---------------------------------------------------------------------------

enum class Variant { no_sign, classical, superconductivity };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::no_sign: return "no_sign";
        case Variant::classical: return "classical";
        case Variant::superconductivity: return "superconductivity";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "no_sign") return Variant::no_sign;
    if (s == "classical") return Variant::classical;
    if (s == "superconductivity") return Variant::superconductivity;
    throw Error(ErrorKind::parameter, "unknown variant '" + s + "'");
}

/// Multipliers of the grid-scaled coincidence tests |u| <= c_u h^2 s and
/// |grad u| <= c_g h s, with s = max |u|.
struct Thresholds {
    double c_u = 1.0;
    double c_g = 1.0;
};

/// Vertex mask of the discrete coincidence set.
///   no_sign:           u and grad u both small
///   classical:         u == 0 (to rounding)
///   superconductivity: grad u small
inline std::vector<std::uint8_t> coincidence_mask(const ScalarField& u, Variant variant, Thresholds th = {}) {
    const double s = std::max(u.scale(), std::numeric_limits<double>::min());
    const double h = u.h();
    const double tol_u = th.c_u * h * h * s;
    const double tol_g = th.c_g * h * s;
    std::vector<std::uint8_t> mask(u.spec().size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        switch (variant) {
            case Variant::classical: mask[i] = std::abs(u[i]) <= 1e-12 * s; break;
            case Variant::no_sign: mask[i] = std::abs(u[i]) <= tol_u && u.gradient_norm_at(i) <= tol_g; break;
            case Variant::superconductivity: mask[i] = u.gradient_norm_at(i) <= tol_g; break;
        }
    }
    return mask;
}

/// Mask vertices with an axis neighbour of different coincidence status.
inline std::vector<std::uint8_t> interface_mask(const GridSpec& spec, const std::vector<std::uint8_t>& lambda) {
    std::vector<std::uint8_t> out(lambda.size(), 0);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        const auto ijk = spec.multi_index(i);
        for (int d = 0; d < spec.dim && !out[i]; ++d) {
            const std::size_t st = spec.stride(d);
            if (ijk[d] > 0 && lambda[i - st] != lambda[i]) out[i] = 1;
            if (ijk[d] < spec.points - 1 && lambda[i + st] != lambda[i]) out[i] = 1;
        }
    }
    return out;
}

/// Dilates a vertex mask by `radius` grid steps in the max-norm.
inline std::vector<std::uint8_t> dilate(const GridSpec& spec, const std::vector<std::uint8_t>& mask, int radius) {
    std::vector<std::uint8_t> cur = mask, next(mask.size());
    for (int d = 0; d < spec.dim; ++d) {
        const std::size_t st = spec.stride(d);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const int c = spec.multi_index(i)[d];
            std::uint8_t v = 0;
            for (int k = -radius; k <= radius && !v; ++k) {
                const int cc = c + k;
                if (cc < 0 || cc >= spec.points) continue;
                v = cur[static_cast<std::size_t>(static_cast<long long>(i) + static_cast<long long>(k) * static_cast<long long>(st))];
            }
            next[i] = v;
        }
        std::swap(cur, next);
    }
    return cur;
}

/// Coincidence vertices bordering the non-coincidence region: the grid trace of Gamma.
inline std::vector<std::size_t> free_boundary_vertices(const ScalarField& u, Variant variant, Thresholds th = {}) {
    const auto lambda = coincidence_mask(u, variant, th);
    const auto iface = interface_mask(u.spec(), lambda);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        if (lambda[i] && iface[i]) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------
// Negativity set measures
// ---------------------------------------------------------------------------

/// Multilinear interpolation; monotone in the data, unlike the cubic interpolant.
inline double linear_interpolate(const ScalarField& v, const Point& x) {
    const auto& spec = v.spec();
    const int n = spec.points;
    const double h = v.h();
    std::array<int, 3> cell{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int d = 0; d < v.dim(); ++d) {
        if (std::abs(x[d]) > 1.0 + 1e-12) throw Error(ErrorKind::out_of_domain, "point outside [-1,1]^n");
        const double t = std::clamp((x[d] + 1.0) / h, 0.0, static_cast<double>(n - 1));
        cell[d] = std::min(static_cast<int>(std::floor(t)), n - 2);
        frac[d] = t - cell[d];
    }
    double s = 0.0;
    const int corners = 1 << v.dim();
    for (int c = 0; c < corners; ++c) {
        std::array<int, 3> ijk = cell;
        double w = 1.0;
        for (int d = 0; d < v.dim(); ++d) {
            const int bit = (c >> d) & 1;
            ijk[d] += bit;
            w *= bit ? frac[d] : 1.0 - frac[d];
        }
        s += w * v[spec.index(ijk)];
    }
    return s;
}

inline double negativity_threshold(const ScalarField& v) { return -1e-12 * v.scale(); }

namespace detail {

inline void require_measure_ball(const ScalarField& v, const Point& x0, double r) {
    if (!(r >= 4.0 * v.h() - 1e-12))
        throw Error(ErrorKind::radius_too_small,
                    "radius " + std::to_string(r) + " below the minimum 4h = " + std::to_string(4.0 * v.h()));
    for (int d = 0; d < v.dim(); ++d)
        if (std::abs(x0[d]) + r > 1.0 + 1e-12)
            throw Error(ErrorKind::out_of_domain, "ball leaves the domain [-1,1]^n");
}

}  // namespace detail

/// |{v < 0} cap B_rho(x0)| / |B_rho|, by counting a sub-lattice of spacing
/// h/2 (vertices and cell midpoints) with multilinear values.
inline double negative_density(const ScalarField& v, const Point& x0, double rho) {
    detail::require_measure_ball(v, x0, rho);
    const double step = 0.5 * v.h();
    const double thr = negativity_threshold(v);
    const int k = static_cast<int>(std::ceil(rho / step));
    std::size_t inside = 0, negative = 0;
    std::array<int, 3> lo{-k, -k, v.dim() == 3 ? -k : 0}, hi{k, k, v.dim() == 3 ? k : 0};
    // Lattice anchored at the grid so sample points are vertices and midpoints.
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    for (int d = 0; d < v.dim(); ++d) origin[d] = std::round((x0[d] + 1.0) / step) * step - 1.0;
    for (int a = lo[0]; a <= hi[0]; ++a)
        for (int b = lo[1]; b <= hi[1]; ++b)
            for (int c = lo[2]; c <= hi[2]; ++c) {
                const Point x{origin[0] + a * step, origin[1] + b * step, v.dim() == 3 ? origin[2] + c * step : 0.0};
                if (distance(x, x0, v.dim()) >= rho) continue;
                bool in_domain = true;
                for (int d = 0; d < v.dim(); ++d) in_domain = in_domain && std::abs(x[d]) <= 1.0;
                if (!in_domain) continue;
                ++inside;
                if (linear_interpolate(v, x) < thr) ++negative;
            }
    return inside == 0 ? 0.0 : static_cast<double>(negative) / static_cast<double>(inside);
}

namespace detail {

/// 1D squared Euclidean distance transform (lower envelope of parabolas).
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    const double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == inf) continue;
        if (f[v[k]] == inf) {
            v[k] = q;
            continue;
        }
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = f[v[k]] == inf ? inf : (q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

}  // namespace detail

/// MR(B_r(y) cap {v < 0}): radius of the largest ball inside the union of grid
/// cells whose corners are all negative, intersected with B_r(y). Computed with
/// an exact distance transform over cell centres; accurate to about h.
inline double max_radius_negative(const ScalarField& v, const Point& y, double r) {
    detail::require_measure_ball(v, y, r);
    const auto& spec = v.spec();
    const int dim = v.dim();
    const double h = v.h();
    const double thr = negativity_threshold(v);
    const int cells = spec.points - 1;

    // Cell window covering the ball, padded by one barrier cell on each side.
    std::array<int, 3> lo{0, 0, 0}, ext{1, 1, 1};
    for (int d = 0; d < dim; ++d) {
        const int a = std::max(0, static_cast<int>(std::floor((y[d] - r + 1.0) / h)) - 1);
        const int b = std::min(cells - 1, static_cast<int>(std::ceil((y[d] + r + 1.0) / h)) + 1);
        lo[d] = a - 1;
        ext[d] = b - a + 3;
    }
    const std::size_t total = static_cast<std::size_t>(ext[0]) * ext[1] * ext[2];
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(total, inf);
    std::vector<std::uint8_t> in_set(total, 0);
    auto widx = [&](int a, int b, int c) { return (static_cast<std::size_t>(a) * ext[1] + b) * ext[2] + c; };

    for (int a = 0; a < ext[0]; ++a)
        for (int b = 0; b < ext[1]; ++b)
            for (int c = 0; c < ext[2]; ++c) {
                const std::array<int, 3> cell{lo[0] + a, lo[1] + b, dim == 3 ? lo[2] + c : 0};
                bool inside_grid = true;
                for (int d = 0; d < dim; ++d) inside_grid = inside_grid && cell[d] >= 0 && cell[d] < cells;
                bool negative = inside_grid;
                if (inside_grid) {
                    const int corners = 1 << dim;
                    for (int k = 0; k < corners && negative; ++k) {
                        std::array<int, 3> ijk = cell;
                        for (int d = 0; d < dim; ++d) ijk[d] += (k >> d) & 1;
                        negative = v[spec.index(ijk)] < thr;
                    }
                }
                const bool border = a == 0 || a == ext[0] - 1 || b == 0 || b == ext[1] - 1 ||
                                    (dim == 3 && (c == 0 || c == ext[2] - 1));
                in_set[widx(a, b, c)] = negative && !border;
                dist[widx(a, b, c)] = in_set[widx(a, b, c)] ? inf : 0.0;
            }

    std::vector<int> vv;
    std::vector<double> zz;
    for (int axis = 0; axis < dim; ++axis) {
        const int len = ext[axis];
        std::vector<double> f(len), out(len);
        std::array<int, 3> it{0, 0, 0};
        std::array<int, 3> bound = ext;
        bound[axis] = 1;
        for (it[0] = 0; it[0] < bound[0]; ++it[0])
            for (it[1] = 0; it[1] < bound[1]; ++it[1])
                for (it[2] = 0; it[2] < bound[2]; ++it[2]) {
                    std::array<int, 3> p = it;
                    for (int q = 0; q < len; ++q) {
                        p[axis] = q;
                        f[q] = dist[widx(p[0], p[1], p[2])];
                    }
                    detail::edt_1d(f.data(), out.data(), len, vv, zz);
                    for (int q = 0; q < len; ++q) {
                        p[axis] = q;
                        dist[widx(p[0], p[1], p[2])] = out[q];
                    }
                }
    }

    double best = 0.0;
    for (int a = 0; a < ext[0]; ++a)
        for (int b = 0; b < ext[1]; ++b)
            for (int c = 0; c < ext[2]; ++c) {
                if (!in_set[widx(a, b, c)]) continue;
                Point centre{0.0, 0.0, 0.0};
                const std::array<int, 3> cell{lo[0] + a, lo[1] + b, lo[2] + c};
                for (int d = 0; d < dim; ++d) centre[d] = -1.0 + (cell[d] + 0.5) * h;
                const double to_sphere = r - distance(centre, y, dim);
                if (to_sphere <= 0.0) continue;
                const double to_boundary = std::sqrt(dist[widx(a, b, c)]) * h - 0.5 * h;
                best = std::max(best, std::min(to_sphere, to_boundary));
            }
    return std::clamp(best, 0.0, r);
}

// ---------------------------------------------------------------------------
// Class P(M, omega, eps, x0)
// ---------------------------------------------------------------------------

/// Modulus of continuity: zero, const:c, power:C=..,a=.. (C r^a), log:C=..,b=.. (C log(1/r)^-b).
struct Modulus {
    enum class Kind { zero, constant, power, log } kind = Kind::zero;
    double c = 0.0;
    double exponent = 0.0;

    double operator()(double r) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::constant: return c;
            case Kind::power: return c * std::pow(r, exponent);
            case Kind::log: return r >= 1.0 ? std::numeric_limits<double>::infinity()
                                            : c * std::pow(std::log(1.0 / r), -exponent);
        }
        return 0.0;
    }

    static Modulus parse(const std::string& text) {
        Modulus m;
        if (text == "zero") return m;
        if (text.rfind("const:", 0) == 0 && text.find('=') == std::string::npos) {
            m.kind = Kind::constant;
            try {
                m.c = std::stod(text.substr(6));
            } catch (const std::exception&) {
                throw Error(ErrorKind::parameter, "malformed modulus '" + text + "'");
            }
            return m;
        }
        const auto ref = parse_fixture_ref(text);
        if (ref.name == "const") {
            m.kind = Kind::constant;
            m.c = ref.number("c");
            return m;
        }
        if (ref.name == "power") {
            m.kind = Kind::power;
            m.c = ref.number("C");
            m.exponent = ref.number("a");
            return m;
        }
        if (ref.name == "log") {
            m.kind = Kind::log;
            m.c = ref.number("C");
            m.exponent = ref.number("b");
            return m;
        }
        throw Error(ErrorKind::parameter, "unknown modulus '" + text + "'");
    }
};

struct ClassPRadius {
    double r = 0.0;
    double ratio = 0.0;  ///< sup_y MR(B_r(y) cap {u<0}) / r
    double omega = 0.0;
    bool ok = true;
};

struct ClassPReport {
    bool member = false;
    bool hessian_ok = false;
    double hessian_max = 0.0;
    std::size_t boundary_points = 0;
    std::vector<ClassPRadius> profile;  ///< increasing r
};

/// Largest spectral norm of the discrete Hessian over interior vertices.
inline double max_hessian_norm(const ScalarField& u) {
    const int dim = u.dim();
    double best = 0.0;
    for (std::size_t i = 0; i < u.spec().size(); ++i) {
        if (!u.spec().is_interior(u.spec().multi_index(i))) continue;
        Eigen::Matrix3d hs = Eigen::Matrix3d::Zero();
        for (int a = 0; a < dim; ++a)
            for (int b = a; b < dim; ++b) hs(a, b) = hs(b, a) = u.hessian_at(i, a, b);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(hs, Eigen::EigenvaluesOnly);
        best = std::max(best, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    return best;
}

/// Evaluates the Hessian bound and the thinness condition on {u < 0} over
/// dyadic radii. Free boundary points are detected near x0 unless supplied.
inline ClassPReport check_class_P(const ScalarField& u, const Point& x0, double eps, double M, const Modulus& omega,
                                  std::optional<std::vector<Point>> boundary = std::nullopt,
                                  Variant variant = Variant::no_sign, Thresholds th = {},
                                  std::size_t max_points = 128) {
    std::vector<Point> ys;
    if (boundary) {
        ys = *boundary;
    } else {
        for (std::size_t i : free_boundary_vertices(u, variant, th)) {
            const auto x = u.spec().vertex(i);
            if (distance(x, x0, u.dim()) <= eps) ys.push_back(x);
        }
    }
    if (ys.empty())
        throw Error(ErrorKind::classification, "no free boundary points found within eps of x0");
    if (ys.size() > max_points) {
        std::vector<Point> thinned;
        const double stride = static_cast<double>(ys.size()) / static_cast<double>(max_points);
        for (std::size_t k = 0; k < max_points; ++k) thinned.push_back(ys[static_cast<std::size_t>(k * stride)]);
        ys = std::move(thinned);
    }

    ClassPReport rep;
    rep.boundary_points = ys.size();
    rep.hessian_max = max_hessian_norm(u);
    rep.hessian_ok = rep.hessian_max <= M;

    double reach = 1.0;
    for (const auto& y : ys)
        for (int d = 0; d < u.dim(); ++d) reach = std::min(reach, 1.0 - std::abs(y[d]));
    reach = std::min(reach, 1.0 - eps);
    bool cond4 = true;
    for (double r = 0.5; r >= 4.0 * u.h() - 1e-12; r *= 0.5) {
        if (r > reach) continue;
        ClassPRadius row;
        row.r = r;
        for (const auto& y : ys) row.ratio = std::max(row.ratio, max_radius_negative(u, y, r) / r);
        row.omega = omega(r);
        row.ok = row.ratio <= row.omega + u.h() / r;
        cond4 = cond4 && row.ok;
        rep.profile.push_back(row);
    }
    std::reverse(rep.profile.begin(), rep.profile.end());
    rep.member = cond4 && rep.hessian_ok && !rep.profile.empty();
    return rep;
}

}  // namespace oblab
