#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oblab/error.hpp"
#include "oblab/grid.hpp"

namespace oblab {

/// Value and gradient of the interpolant at one point.
struct Jet {
    double value = 0.0;
    Point gradient{0.0, 0.0, 0.0};
};

namespace detail {

/// Cubic Lagrange weights on nodes 0,1,2,3 at local coordinate tau, plus
/// their derivatives with respect to tau.
inline void lagrange4(double tau, double w[4], double dw[4]) {
    const double t0 = tau, t1 = tau - 1.0, t2 = tau - 2.0, t3 = tau - 3.0;
    w[0] = -t1 * t2 * t3 / 6.0;
    w[1] = t0 * t2 * t3 / 2.0;
    w[2] = -t0 * t1 * t3 / 2.0;
    w[3] = t0 * t1 * t2 / 6.0;
    dw[0] = -(t2 * t3 + t1 * t3 + t1 * t2) / 6.0;
    dw[1] = (t2 * t3 + t0 * t3 + t0 * t2) / 2.0;
    dw[2] = -(t1 * t3 + t0 * t3 + t0 * t1) / 2.0;
    dw[3] = (t1 * t2 + t0 * t2 + t0 * t1) / 6.0;
}

struct AxisStencil {
    int start = 0;
    double w[4]{};
    double dw[4]{};
};

}  // namespace detail

/// Sampled real field on a uniform vertex grid. Immutable after construction.
class ScalarField {
public:
    ScalarField() = default;

    ScalarField(GridSpec spec, std::vector<double> values, std::string label = {})
        : spec_(spec), values_(std::move(values)), label_(std::move(label)) {
        spec_.validate();
        if (values_.size() != spec_.size())
            throw Error(ErrorKind::parameter, "field value count " + std::to_string(values_.size()) +
                                                  " does not match grid size " + std::to_string(spec_.size()));
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                std::ostringstream os;
                const auto x = spec_.vertex(i);
                os << "non-finite value at vertex " << i << " (" << x[0] << ", " << x[1];
                if (spec_.dim == 3) os << ", " << x[2];
                os << ")";
                throw Error(ErrorKind::non_finite_sample, os.str());
            }
        }
        for (double v : values_) scale_ = std::max(scale_, std::abs(v));
    }

    const GridSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }
    double h() const { return spec_.spacing(); }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::string& label() const { return label_; }

    /// max |v| over the grid; the reference magnitude for relative thresholds.
    double scale() const { return scale_; }

    bool evaluable(const Point& x) const {
        const double lim = spec_.evaluable_half_width() + 1e-12;
        for (int d = 0; d < dim(); ++d)
            if (!(std::abs(x[d]) <= lim)) return false;
        return true;
    }

    /// True when the closed ball B_r(center) lies inside the evaluable cube.
    bool ball_evaluable(const Point& center, double r) const {
        const double lim = spec_.evaluable_half_width() + 1e-12;
        for (int d = 0; d < dim(); ++d)
            if (std::abs(center[d]) + r > lim) return false;
        return true;
    }

    double interpolate(const Point& x) const { return evaluate(x, false).value; }

    Point gradient(const Point& x) const { return evaluate(x, true).gradient; }

    Jet jet(const Point& x) const { return evaluate(x, true); }

    /// 5-point (2D) / 7-point (3D) Laplacian at an interior vertex.
    double laplacian_at(std::size_t idx) const {
        const double h2 = h() * h();
        double s = -2.0 * dim() * values_[idx];
        for (int d = 0; d < dim(); ++d) {
            const std::size_t st = spec_.stride(d);
            s += values_[idx + st] + values_[idx - st];
        }
        return s / h2;
    }

    double second_difference_at(std::size_t idx, int axis) const {
        const std::size_t st = spec_.stride(axis);
        return (values_[idx + st] - 2.0 * values_[idx] + values_[idx - st]) / (h() * h());
    }

    /// Central-difference Hessian entry at an interior vertex.
    double hessian_at(std::size_t idx, int a, int b) const {
        if (a == b) return second_difference_at(idx, a);
        const std::size_t sa = spec_.stride(a), sb = spec_.stride(b);
        return (values_[idx + sa + sb] - values_[idx + sa - sb] - values_[idx - sa + sb] +
                values_[idx - sa - sb]) /
               (4.0 * h() * h());
    }

    /// Central differences where possible, one-sided on the grid boundary.
    double gradient_norm_at(std::size_t idx) const {
        const auto ijk = spec_.multi_index(idx);
        double s = 0.0;
        for (int d = 0; d < dim(); ++d) {
            const std::size_t st = spec_.stride(d);
            double g;
            if (ijk[d] == 0)
                g = (values_[idx + st] - values_[idx]) / h();
            else if (ijk[d] == spec_.points - 1)
                g = (values_[idx] - values_[idx - st]) / h();
            else
                g = (values_[idx + st] - values_[idx - st]) / (2.0 * h());
            s += g * g;
        }
        return std::sqrt(s);
    }

private:
    /// Tensor-product cubic interpolation. Along each axis the 4-point stencil
    /// is picked ENO-style among the three stencils covering the cell: the
    /// centered one unless a one-sided one has a much smaller third difference.
    /// Every candidate reproduces cubics, so the interpolant stays exact on
    /// polynomials of degree <= 3 while not straddling kinks on grid lines.
    Jet evaluate(const Point& x, bool with_gradient) const {
        if (!evaluable(x)) {
            std::ostringstream os;
            os << "point (" << x[0] << ", " << x[1];
            if (dim() == 3) os << ", " << x[2];
            os << ") outside the evaluable cube [-" << spec_.evaluable_half_width() << ", "
               << spec_.evaluable_half_width() << "]^" << dim();
            throw Error(ErrorKind::out_of_domain, os.str());
        }
        const int n = spec_.points;
        const double hh = h();
        std::array<int, 3> cell{0, 0, 0}, nearest{0, 0, 0};
        std::array<double, 3> t{0.0, 0.0, 0.0};
        for (int d = 0; d < dim(); ++d) {
            t[d] = std::clamp((x[d] + 1.0) / hh, 2.0, static_cast<double>(n - 3));
            cell[d] = std::min(static_cast<int>(std::floor(t[d])), n - 4);
            nearest[d] = static_cast<int>(std::lround(t[d]));
        }

        std::array<detail::AxisStencil, 3> st{};
        for (int d = 0; d < dim(); ++d) {
            std::array<int, 3> base = nearest;
            base[d] = cell[d] - 2;
            const std::size_t i0 = spec_.index(base);
            const std::size_t stride = spec_.stride(d);
            double f[6];
            for (int k = 0; k < 6; ++k) f[k] = values_[i0 + k * stride];
            double third[3];
            for (int s = 0; s < 3; ++s)
                third[s] = std::abs(f[s + 3] - 3.0 * f[s + 2] + 3.0 * f[s + 1] - f[s]);
            int choice = 1;
            const double side = std::min(third[0], third[2]);
            if (side < 0.25 * third[1]) choice = third[0] <= third[2] ? 0 : 2;
            st[d].start = cell[d] - 2 + choice;
            detail::lagrange4(t[d] - st[d].start, st[d].w, st[d].dw);
        }

        Jet out;
        if (dim() == 2) {
            const std::size_t s0 = spec_.stride(0);
            for (int a = 0; a < 4; ++a) {
                const std::size_t row = static_cast<std::size_t>(st[0].start + a) * s0 + st[1].start;
                double v = 0.0, dv = 0.0;
                for (int b = 0; b < 4; ++b) {
                    const double f = values_[row + b];
                    v += st[1].w[b] * f;
                    dv += st[1].dw[b] * f;
                }
                out.value += st[0].w[a] * v;
                if (with_gradient) {
                    out.gradient[0] += st[0].dw[a] * v;
                    out.gradient[1] += st[0].w[a] * dv;
                }
            }
        } else {
            const std::size_t s0 = spec_.stride(0), s1 = spec_.stride(1);
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    const std::size_t row = static_cast<std::size_t>(st[0].start + a) * s0 +
                                            static_cast<std::size_t>(st[1].start + b) * s1 + st[2].start;
                    double v = 0.0, dv = 0.0;
                    for (int c = 0; c < 4; ++c) {
                        const double f = values_[row + c];
                        v += st[2].w[c] * f;
                        dv += st[2].dw[c] * f;
                    }
                    const double wab = st[0].w[a] * st[1].w[b];
                    out.value += wab * v;
                    if (with_gradient) {
                        out.gradient[0] += st[0].dw[a] * st[1].w[b] * v;
                        out.gradient[1] += st[0].w[a] * st[1].dw[b] * v;
                        out.gradient[2] += wab * dv;
                    }
                }
            }
        }
        if (with_gradient)
            for (int d = 0; d < dim(); ++d) out.gradient[d] /= hh;
        return out;
    }

    GridSpec spec_{};
    std::vector<double> values_;
    std::string label_;
    double scale_ = 0.0;
};

/// Samples f at every vertex. f receives a Point with zero-padded trailing coordinates.
template <class F>
ScalarField sample(const GridSpec& spec, F&& f, std::string label = {}) {
    spec.validate();
    std::vector<double> values(spec.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(spec.vertex(i));
    return ScalarField(spec, std::move(values), std::move(label));
}

/// Pointwise combination of two fields on the same grid.
template <class Op>
ScalarField combine(const ScalarField& a, const ScalarField& b, Op op, std::string label = {}) {
    if (!(a.spec() == b.spec())) throw Error(ErrorKind::parameter, "fields live on different grids");
    std::vector<double> values(a.spec().size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = op(a[i], b[i]);
    return ScalarField(a.spec(), std::move(values), std::move(label));
}

/// v(x) - g(x) at every vertex, for subtracting an analytic polynomial from a sampled field.
template <class G>
ScalarField subtract(const ScalarField& v, G&& g, std::string label = {}) {
    std::vector<double> values(v.spec().size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = v[i] - g(v.spec().vertex(i));
    return ScalarField(v.spec(), std::move(values), std::move(label));
}

inline ScalarField scaled(const ScalarField& v, double alpha) {
    std::vector<double> values(v.values().begin(), v.values().end());
    for (double& x : values) x *= alpha;
    return ScalarField(v.spec(), std::move(values), v.label());
}

}  // namespace oblab
