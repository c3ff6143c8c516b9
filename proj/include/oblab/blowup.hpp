#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "oblab/error.hpp"
#include "oblab/field.hpp"
#include "oblab/fixtures.hpp"
#include "oblab/functionals.hpp"
#include "oblab/measures.hpp"
#include "oblab/polynomial.hpp"
#include "oblab/quadrature.hpp"

namespace oblab {

struct BlowupTolerances {
    double fit = 1e-3;         ///< successive (extrapolated) fits must agree to this, Frobenius norm
    double kernel = 1e-2;      ///< |eigenvalue| below this counts as kernel
    double trace = 2e-2;       ///< trace renormalized to 1 when within this
    double residual = 0.25;    ///< relative L2 misfit above this means the point is not quadratic
    double lambda = 0.05;      ///< slack on the 5/2 and 3 cuts and on half-integer rounding
    double confidence = 0.2;   ///< decade variation of phi above this leaves lambda_* unresolved
    double harmonic = 1e-2;    ///< Almgren blowup misfit above this is reported as non-polynomial
    double structure = 1e-3;   ///< lambda_* = 2 block structure
};

/// p(x) = 1/2 <A x, x> together with its spectral data. Eigenvalues run in
/// descending order, so the kernel is the tail.
struct BlowupPolynomial {
    QuadraticForm p;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;  ///< columns match eigenvalues
    int m = 0;

    static BlowupPolynomial from(const QuadraticForm& q, double tau_kernel = BlowupTolerances{}.kernel) {
        BlowupPolynomial b;
        b.p = QuadraticForm(0.5 * (q.A + q.A.transpose()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.p.A);
        const int n = b.p.dim();
        b.eigenvalues = es.eigenvalues().reverse();
        b.eigenvectors = es.eigenvectors().rowwise().reverse();
        for (int k = n - 1; k >= 0 && std::abs(b.eigenvalues(k)) <= tau_kernel; --k) ++b.m;
        return b;
    }

    Eigen::MatrixXd kernel() const { return eigenvectors.rightCols(m); }
    Eigen::MatrixXd complement() const { return eigenvectors.leftCols(p.dim() - m); }
    bool nonnegative(double tau_kernel = BlowupTolerances{}.kernel) const {
        return eigenvalues.minCoeff() >= -tau_kernel;
    }
};

/// u_{x0,r}(x) = u(x0 + r x) / r^2 resampled on the grid of u. The whole cube
/// x0 + r[-1,1]^n must be evaluable since every vertex gets a value.
inline ScalarField rescale(const ScalarField& u, const Point& x0, double r) {
    const auto& spec = u.spec();
    if (!(r >= 8.0 * u.h() - 1e-12))
        throw Error(ErrorKind::radius_too_small, "rescale needs r >= 8h = " + std::to_string(8.0 * u.h()));
    Point lo = x0, hi = x0;
    for (int d = 0; d < spec.dim; ++d) {
        lo[d] -= r;
        hi[d] += r;
    }
    if (!u.evaluable(lo) || !u.evaluable(hi))
        throw Error(ErrorKind::out_of_domain, "rescaled cube leaves the evaluable region");
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        Point y = spec.vertex(i);
        for (int d = 0; d < spec.dim; ++d) y[d] = x0[d] + r * y[d];
        out[i] = u.interpolate(y) / (r * r);
    }
    return ScalarField(spec, std::move(out), u.label() + "|rescaled");
}

/// Largest radius around x0 whose ball stays evaluable.
inline double evaluable_radius(const ScalarField& u, const Point& x0) {
    double m = 0.0;
    for (int d = 0; d < u.dim(); ++d) m = std::max(m, std::abs(x0[d]));
    return u.spec().evaluable_half_width() - m;
}

/// Dyadic radii r_max, r_max/2, ... down to 8h.
inline std::vector<double> default_radii(const ScalarField& u, const Point& x0, double r_max = 0.5) {
    r_max = std::min(r_max, evaluable_radius(u, x0));
    std::vector<double> out;
    for (double r = r_max; r >= 8.0 * u.h() - 1e-12; r *= 0.5) out.push_back(r);
    return out;
}

namespace detail {

inline std::vector<std::pair<int, int>> quadratic_slots(int n) {
    std::vector<std::pair<int, int>> s;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) s.emplace_back(i, j);
    return s;
}

struct QuadraticFitAtRadius {
    Eigen::MatrixXd A;
    double residual = 0.0;  ///< relative L2 misfit over the ball
};

/// Least-squares fit of u(x0 + y) by 1/2 <A y, y> over B_r, in the L2 sense
/// of the ball quadrature.
inline QuadraticFitAtRadius fit_quadratic(const ScalarField& u, const Point& x0, double r) {
    detail::require_ball(u, x0, r);
    const int n = u.dim();
    const auto slots = quadratic_slots(n);
    const int k = static_cast<int>(slots.size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd phi(k);
    double mass = 0.0;
    for_each_ball_node(n, x0, r, u.h(), [&](const Point& x, double w) {
        double y[3] = {x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]};
        for (int s = 0; s < k; ++s) {
            const auto [i, j] = slots[s];
            phi(s) = i == j ? 0.5 * y[i] * y[i] : y[i] * y[j];
        }
        const double f = u.interpolate(x);
        gram.noalias() += w * phi * phi.transpose();
        rhs += (w * f) * phi;
        mass += w * f * f;
    });
    const Eigen::VectorXd c = gram.ldlt().solve(rhs);
    QuadraticFitAtRadius out;
    out.A = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < k; ++s) {
        const auto [i, j] = slots[s];
        out.A(i, j) = out.A(j, i) = c(s);
    }
    const double misfit = std::max(0.0, mass - rhs.dot(c));
    out.residual = mass > 0.0 ? std::sqrt(misfit / mass) : 0.0;
    return out;
}

}  // namespace detail

struct BlowupFit {
    bool accepted = false;
    std::string reason;
    std::string method;  ///< "stationary" or "aitken"
    BlowupPolynomial blowup;
    std::vector<double> radii;
    std::vector<Eigen::MatrixXd> raw;
    std::vector<double> residuals;
    double change = 0.0;        ///< last successive difference of the accepted sequence
    double ratio = 0.0;         ///< Aitken contraction ratio, 0 when unused
    double trace = 1.0;         ///< trace before renormalization
    bool trace_warning = false; ///< trace off by more than tau_tr: field is likely not a solution
};

/// Quadratic blowup at x0 from fits of u over shrinking balls. Fits that
/// settle directly are accepted as they are; fits that drift geometrically
/// (half-integer deficits drift like r^{lambda-2}) are Aitken-extrapolated and
/// accepted when consecutive extrapolations agree.
inline BlowupFit fit_blowup(const ScalarField& u, const Point& x0, std::vector<double> radii,
                            const BlowupTolerances& tol = {}) {
    if (radii.size() < 3) throw Error(ErrorKind::insufficient_data, "fit_blowup needs at least 3 radii");
    std::sort(radii.begin(), radii.end(), std::greater<>());
    BlowupFit fit;
    fit.radii = radii;
    for (double r : radii) {
        if (!(r >= 8.0 * u.h() - 1e-12))
            throw Error(ErrorKind::radius_too_small, "blowup radii must be >= 8h = " + std::to_string(8.0 * u.h()));
        auto q = detail::fit_quadratic(u, x0, r);
        fit.raw.push_back(q.A);
        fit.residuals.push_back(q.residual);
    }
    const std::size_t J = radii.size() - 1;
    auto diff = [&](std::size_t j) { return Eigen::MatrixXd(fit.raw[j + 1] - fit.raw[j]); };

    auto aitken = [&](std::size_t j, double& q) -> std::optional<Eigen::MatrixXd> {
        const Eigen::MatrixXd d1 = diff(j - 2), d2 = diff(j - 1);
        const double den = d1.squaredNorm();
        if (den == 0.0) return std::nullopt;
        q = (d2.array() * d1.array()).sum() / den;
        if (!(q > 0.0 && q < 0.95)) return std::nullopt;
        return Eigen::MatrixXd(fit.raw[j] + d2 * (q / (1.0 - q)));
    };

    Eigen::MatrixXd A;
    const double last = diff(J - 1).norm();
    double q_last = 0.0, q_prev = 0.0;
    const bool drifting = last > 1e-10 * std::max(1.0, fit.raw[J].norm());
    const auto a_last = drifting && J >= 3 ? aitken(J, q_last) : std::nullopt;
    const auto a_prev = drifting && J >= 3 ? aitken(J - 1, q_prev) : std::nullopt;
    const double agreement = a_last && a_prev ? (*a_last - *a_prev).norm() : std::numeric_limits<double>::infinity();
    if (agreement < tol.fit) {
        // Extrapolation also wins over fits that look settled: a slow drift
        // below tau_fit still biases the deficit at the smallest radii.
        fit.method = "aitken";
        fit.change = agreement;
        fit.ratio = q_last;
        A = *a_last;
    } else if (last < tol.fit) {
        fit.method = "stationary";
        fit.change = last;
        A = fit.raw[J];
    } else {
        fit.change = std::min(last, agreement);
        fit.reason = a_last && a_prev ? "extrapolated fits disagree by " + std::to_string(agreement)
                                      : "fits do not converge (regular or unresolved)";
        return fit;
    }
    if (fit.residuals.back() > tol.residual) {
        fit.reason = "quadratic misfit " + std::to_string(fit.residuals.back()) + " (regular point, not quadratic)";
        return fit;
    }
    A = 0.5 * (A + A.transpose());
    fit.trace = A.trace();
    if (std::abs(fit.trace - 1.0) <= tol.trace)
        A /= fit.trace;
    else
        fit.trace_warning = true;
    fit.blowup = BlowupPolynomial::from(QuadraticForm(A), tol.kernel);
    fit.accepted = true;
    return fit;
}

enum class StratumLabel { generic, anomalous, unresolved };

inline const char* to_string(StratumLabel s) {
    switch (s) {
        case StratumLabel::generic: return "generic";
        case StratumLabel::anomalous: return "anomalous";
        case StratumLabel::unresolved: return "unresolved";
    }
    return "?";
}

struct SingularPoint {
    Point location{0.0, 0.0, 0.0};
    int dim = 2;
    BlowupPolynomial blowup;
    double fit_residual = 0.0;
    double lambda_star = 0.0;
    double confidence = 0.0;
    double lambda_margin = 0.0;  ///< lambda_* - 2
    int m = 0;
    StratumLabel label = StratumLabel::unresolved;
    bool isolated = false;       ///< m = 0
    bool sigma_plus = false;
    bool sigma_plus_eigen = false;
    bool sigma_plus_density = false;
    bool sigma_plus_ambiguous = false;
    std::vector<double> density_radii;
    std::vector<double> densities;
    FrequencyProfile profile;
};

/// Frequency cut separating generic from anomalous points on stratum m.
inline double generic_threshold(int n, int m) { return m == n - 1 ? 2.5 : 3.0; }

/// Zero density of {u < 0} at x0, decided from the trend over shrinking radii:
/// either negligible everywhere, or decaying like a positive power of rho.
inline bool zero_density_trend(const std::vector<double>& rho, const std::vector<double>& dens) {
    if (dens.empty()) return true;
    if (*std::max_element(dens.begin(), dens.end()) <= 1e-3) return true;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    for (std::size_t i = 0; i < dens.size(); ++i) {
        if (dens[i] <= 0.0) continue;
        const double x = std::log(rho[i]), y = std::log(dens[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++k;
    }
    if (k < 2) return true;  // positive at a single radius only
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    return slope >= 0.1;
}

struct ClassifyOptions {
    BlowupTolerances tol{};
    std::optional<std::vector<double>> radii;  ///< blowup radii; dyadic down to 8h by default
    double r_max = 0.5;
};

/// Blowup, stratum, Sigma+ flags and lambda_* for a free boundary point.
inline SingularPoint classify(const ScalarField& u, const Point& x0, const ClassifyOptions& opt = {}) {
    const auto radii = opt.radii ? *opt.radii : default_radii(u, x0, opt.r_max);
    const auto fit = fit_blowup(u, x0, radii, opt.tol);
    if (!fit.accepted) throw Error(ErrorKind::classification, "not singular: " + fit.reason);

    SingularPoint sp;
    sp.location = x0;
    sp.dim = u.dim();
    sp.blowup = fit.blowup;
    sp.fit_residual = fit.residuals.back();
    sp.m = fit.blowup.m;
    sp.isolated = sp.m == 0;

    const auto& p = fit.blowup.p;
    const int n = u.dim();
    const auto w = subtract(u, [&](const Point& x) {
        Point y{0.0, 0.0, 0.0};
        for (int d = 0; d < n; ++d) y[d] = x[d] - x0[d];
        return p(y);
    }, "deficit");
    const double r_min = 8.0 * u.h();
    const double r_top = *std::max_element(radii.begin(), radii.end());
    sp.profile = profile(w, x0, r_min, std::max(r_top, 2.0 * r_min));
    sp.lambda_star = sp.profile.lambda_star;
    sp.confidence = sp.profile.confidence;
    sp.lambda_margin = sp.lambda_star - 2.0;

    if (sp.confidence > opt.tol.confidence)
        sp.label = StratumLabel::unresolved;
    else
        sp.label = sp.lambda_star >= generic_threshold(n, sp.m) - opt.tol.lambda ? StratumLabel::generic
                                                                                  : StratumLabel::anomalous;

    sp.sigma_plus_eigen = fit.blowup.nonnegative(opt.tol.kernel);
    for (double r : sp.profile.radii) {
        bool inside = true;
        for (int d = 0; d < n; ++d) inside = inside && std::abs(x0[d]) + r <= 1.0;
        if (!inside || r < 4.0 * u.h()) continue;
        sp.density_radii.push_back(r);
        sp.densities.push_back(negative_density(u, x0, r));
    }
    sp.sigma_plus_density = zero_density_trend(sp.density_radii, sp.densities);
    sp.sigma_plus = sp.sigma_plus_eigen && sp.sigma_plus_density;
    sp.sigma_plus_ambiguous = sp.sigma_plus_eigen != sp.sigma_plus_density;
    return sp;
}

/// Hessian of the degree-2 blowup, D^2 q.
inline Eigen::MatrixXd hessian_of_quadratic(const Polynomial& q) {
    const int n = q.dim();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [e, c] : q.terms()) {
        if (e[0] + e[1] + e[2] != 2) throw Error(ErrorKind::parameter, "polynomial is not quadratic");
        int i = -1, j = -1;
        for (int d = 0; d < n; ++d)
            for (int rep = 0; rep < e[d]; ++rep) (i < 0 ? i : j) = d;
        if (i == j) Q(i, i) += 2.0 * c;
        else Q(i, j) = Q(j, i) = c;
    }
    return Q;
}

/// Normalized Almgren blowup q. Integer lambda_*: coefficients over an
/// orthonormal-in-coefficients basis of homogeneous harmonic polynomials.
/// Half-integer lambda_* (2D): a * sin(lambda (theta - theta0)) with theta -
/// theta0 taken in [0, 2 pi), the cut placed where the fit is best.
struct AlmgrenBlowup {
    double lambda = 2.0;
    bool polynomial = true;
    Polynomial q;                       ///< integer case, ||q||_{L2(dB1)} = 1
    std::vector<double> coefficients;   ///< over harmonic_basis(n, lambda)
    double amplitude = 0.0;             ///< half-integer case
    double cut_angle = 0.0;
    std::vector<double> profile_angles;
    std::vector<double> profile_values;
    double residual = 0.0;              ///< relative L2(dB1) misfit at the smallest radius
    std::vector<double> radii;
    std::vector<double> residuals;
    bool harmonic_polynomial = true;    ///< residual within tau_q

    struct Structure {
        double t = 0.0;
        Eigen::MatrixXd N;
        double off_kernel_deviation = 0.0;  ///< max |eig(off-kernel block) - t|
        double coupling = 0.0;              ///< norm of the mixed block
        double trace_gap = 0.0;             ///< |tr N - (n - m) t|
        int n = 0, m = 0;
    };
    std::optional<Structure> structure;     ///< lambda_* = 2 only

    double operator()(const Point& x) const {
        if (polynomial) return q(x);
        const double r = std::hypot(x[0], x[1]);
        double th = std::atan2(x[1], x[0]) - cut_angle;
        th = std::fmod(th, 2.0 * std::numbers::pi);
        if (th < 0.0) th += 2.0 * std::numbers::pi;
        return amplitude * std::pow(r, lambda) * std::sin(lambda * th);
    }
};

namespace detail {

inline double wrap_angle(double th) {
    th = std::fmod(th, 2.0 * std::numbers::pi);
    return th < 0.0 ? th + 2.0 * std::numbers::pi : th;
}

struct AngularFit {
    double amplitude = 0.0, cut = 0.0, residual = 1.0;
};

inline AngularFit fit_slit_sine(const std::vector<double>& theta, const std::vector<double>& val,
                                const std::vector<double>& wts, double lambda) {
    auto eval = [&](double cut) {
        double sv = 0.0, ss = 0.0, vv = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double s = std::sin(lambda * wrap_angle(theta[k] - cut));
            sv += wts[k] * s * val[k];
            ss += wts[k] * s * s;
            vv += wts[k] * val[k] * val[k];
        }
        AngularFit f;
        f.cut = cut;
        f.amplitude = sv / ss;
        f.residual = std::sqrt(std::max(0.0, vv - sv * sv / ss) / vv);
        return f;
    };
    AngularFit best;
    const int coarse = 720;
    for (int i = 0; i < coarse; ++i) {
        const auto f = eval(2.0 * std::numbers::pi * i / coarse);
        if (f.residual < best.residual) best = f;
    }
    double lo = best.cut - 2.0 * std::numbers::pi / coarse, hi = best.cut + 2.0 * std::numbers::pi / coarse;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
        const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        if (eval(a).residual < eval(b).residual)
            hi = b;
        else
            lo = a;
    }
    const auto refined = eval(0.5 * (lo + hi));
    if (refined.residual < best.residual) best = refined;
    best.cut = wrap_angle(best.cut);
    return best;
}

}  // namespace detail

/// Fits the normalized deficit w~_r = w_r / ||w_r||_{L2(dB1)}, w = u - p_*,
/// on each radius; the smallest radius gives the reported q.
inline AlmgrenBlowup almgren_blowup(const ScalarField& u, const BlowupPolynomial& p_star, const Point& x0,
                                    std::vector<double> radii, double lambda_star,
                                    const BlowupTolerances& tol = {}) {
    const int n = u.dim();
    if (radii.empty()) throw Error(ErrorKind::insufficient_data, "almgren_blowup needs radii");
    std::sort(radii.begin(), radii.end(), std::greater<>());
    const double rounded = std::round(2.0 * lambda_star) / 2.0;
    if (std::abs(lambda_star - rounded) > tol.lambda || rounded < 2.0)
        throw Error(ErrorKind::classification, "lambda_* = " + std::to_string(lambda_star) + " is not resolved");
    const bool integer = is_integer(rounded);
    if (!integer && n != 2)
        throw Error(ErrorKind::classification, "half-integer blowups are only extracted in 2D");

    AlmgrenBlowup out;
    out.lambda = rounded;
    out.polynomial = integer;
    out.radii = radii;
    const auto basis = integer ? harmonic_basis(n, static_cast<int>(rounded)) : std::vector<Polynomial>{};

    for (double r : radii) {
        detail::require_ball(u, x0, r);
        const auto sphere = make_sphere(n, Point{0.0, 0.0, 0.0}, 1.0, u.h() / r);
        std::vector<double> vals, wts;
        vals.reserve(sphere.nodes.size());
        for (const auto& node : sphere.nodes) {
            Point y{0.0, 0.0, 0.0}, x = x0;
            for (int d = 0; d < n; ++d) {
                y[d] = r * node.x[d];
                x[d] += y[d];
            }
            vals.push_back((u.interpolate(x) - p_star.p(y)) / (r * r));
            wts.push_back(node.weight);
        }
        double norm2 = 0.0;
        for (std::size_t k = 0; k < vals.size(); ++k) norm2 += wts[k] * vals[k] * vals[k];
        if (!(norm2 > 0.0)) throw Error(ErrorKind::degenerate_denominator, "deficit vanishes on the sphere");
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : vals) v *= inv;

        if (integer) {
            const int k = static_cast<int>(basis.size());
            Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k), phi(k);
            for (std::size_t j = 0; j < vals.size(); ++j) {
                for (int b = 0; b < k; ++b) phi(b) = basis[b](sphere.nodes[j].x);
                gram.noalias() += wts[j] * phi * phi.transpose();
                rhs += (wts[j] * vals[j]) * phi;
            }
            const Eigen::VectorXd c = gram.ldlt().solve(rhs);
            const double fitted = c.dot(gram * c);
            out.residual = std::sqrt(std::max(0.0, 1.0 - 2.0 * c.dot(rhs) + fitted));
            const double scale = 1.0 / std::sqrt(fitted);
            out.coefficients.assign(k, 0.0);
            out.q = Polynomial(n);
            for (int b = 0; b < k; ++b) {
                out.coefficients[b] = c(b) * scale;
                out.q = out.q + basis[b] * out.coefficients[b];
            }
        } else {
            std::vector<double> theta;
            for (const auto& node : sphere.nodes) theta.push_back(std::atan2(node.x[1], node.x[0]));
            const auto f = detail::fit_slit_sine(theta, vals, wts, rounded);
            out.residual = f.residual;
            out.cut_angle = f.cut;
            out.amplitude = (f.amplitude > 0 ? 1.0 : -1.0) / std::sqrt(std::numbers::pi);
            out.profile_angles = theta;
            out.profile_values = vals;
        }
        out.residuals.push_back(out.residual);
    }
    out.harmonic_polynomial = integer && out.residual <= tol.harmonic;

    if (integer && rounded == 2.0) {
        const Eigen::MatrixXd Q = hessian_of_quadratic(out.q);
        AlmgrenBlowup::Structure s;
        s.n = n;
        s.m = p_star.m;
        const Eigen::MatrixXd V = p_star.complement(), K = p_star.kernel();
        const Eigen::MatrixXd off = V.transpose() * Q * V;
        s.t = n > s.m ? off.trace() / (n - s.m) : 0.0;
        if (n > s.m) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(off);
            s.off_kernel_deviation = (es.eigenvalues().array() - s.t).abs().maxCoeff();
        }
        s.N = s.m > 0 ? Eigen::MatrixXd(-(K.transpose() * Q * K)) : Eigen::MatrixXd(0, 0);
        s.coupling = s.m > 0 && n > s.m ? (V.transpose() * Q * K).norm() : 0.0;
        s.trace_gap = std::abs((s.m > 0 ? s.N.trace() : 0.0) - (n - s.m) * s.t);
        out.structure = s;
    }
    return out;
}

/// int_{dB1} q (p_* - p) by the unit-sphere rule (exact for these degrees).
inline double monneau_integral(const Polynomial& q, const QuadraticForm& p_star, const QuadraticForm& p) {
    const int n = q.dim();
    // The default node counts integrate these degree <= 8 products exactly.
    const auto sphere = make_sphere(n, Point{0.0, 0.0, 0.0}, 1.0, 1.0);
    return sphere.integrate([&](const Point& x) { return q(x) * (p_star(x) - p(x)); });
}

/// Haar-random rotation times Dirichlet(1, ..., 1) spectrum: a sample of P+.
inline QuadraticForm sample_p_plus(int n, std::mt19937_64& rng) {
    const Eigen::MatrixXd Q = haar_rotation(n, rng);
    std::exponential_distribution<double> expo(1.0);
    Eigen::VectorXd lam(n);
    for (int i = 0; i < n; ++i) lam(i) = expo(rng);
    lam /= lam.sum();
    return QuadraticForm(Q * lam.asDiagonal() * Q.transpose());
}

struct MonneauInequalityResult {
    double minimum = std::numeric_limits<double>::infinity();
    QuadraticForm argmin;
    int samples = 0;
    std::uint64_t seed = 0;
};

/// Minimum of int_{dB1} q (p_* - p) over sampled p in P+; p_* itself is
/// included as the first sample.
inline MonneauInequalityResult monneau_inequality(const Polynomial& q, const QuadraticForm& p_star, int samples,
                                                  std::uint64_t seed, bool include_p_star = true) {
    if (q.degree() != 2) throw Error(ErrorKind::parameter, "the inequality is stated for degree-2 blowups");
    MonneauInequalityResult out;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    auto consider = [&](const QuadraticForm& p) {
        const double v = monneau_integral(q, p_star, p);
        ++out.samples;
        if (v < out.minimum) {
            out.minimum = v;
            out.argmin = p;
        }
    };
    if (include_p_star) consider(p_star);
    for (int s = 0; s < samples; ++s) consider(sample_p_plus(q.dim(), rng));
    return out;
}

struct HolderFit {
    bool constant_map = false;
    double beta = std::numeric_limits<double>::quiet_NaN();
    double C = 0.0;
    double r2 = 0.0;
    int pairs = 0;
};

/// Log-log regression of |A_x - A_y| against |x - y|. The bound is an upper
/// envelope, so pairs are binned by log-distance (width 1/4) and only the
/// largest difference in each bin enters the fit; a plain all-pairs fit would
/// report the local slope of a map like sqrt(|x|), which is 1 away from 0.
inline HolderFit holder_exponent(const std::vector<Point>& x, const std::vector<Eigen::MatrixXd>& A, int dim) {
    if (x.size() != A.size()) throw Error(ErrorKind::parameter, "points and matrices differ in count");
    if (x.size() < 5) throw Error(ErrorKind::insufficient_data, "Holder fit needs at least 5 points");
    constexpr double bin_width = 0.25;
    std::map<long, std::pair<double, double>> envelope;  // bin -> (log s, log d) of the largest d
    double largest = 0.0, scale = 0.0;
    int pairs = 0;
    for (const auto& a : A) scale = std::max(scale, a.norm());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double d = (A[i] - A[j]).norm();
            const double s = distance(x[i], x[j], dim);
            largest = std::max(largest, d);
            if (!(d > 0.0 && s > 0.0)) continue;
            ++pairs;
            const double ls = std::log(s), ld = std::log(d);
            const long bin = static_cast<long>(std::floor(ls / bin_width));
            auto it = envelope.find(bin);
            if (it == envelope.end() || ld > it->second.second) envelope[bin] = {ls, ld};
        }
    HolderFit f;
    f.pairs = pairs;
    if (largest <= 1e-12 * std::max(1.0, scale) || envelope.size() < 2) {
        f.constant_map = true;
        f.C = largest;
        return f;
    }
    const double k = static_cast<double>(envelope.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (const auto& [bin, pt] : envelope) {
        const auto [lx, ly] = pt;
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    const double vx = k * sxx - sx * sx, vy = k * syy - sy * sy, cxy = k * sxy - sx * sy;
    f.beta = cxy / vx;
    f.C = std::exp((sy - f.beta * sx) / k);
    f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    return f;
}

inline HolderFit holder_exponent(const std::vector<SingularPoint>& points) {
    std::vector<Point> x;
    std::vector<Eigen::MatrixXd> A;
    for (const auto& p : points) {
        x.push_back(p.location);
        A.push_back(p.blowup.p.A);
    }
    return holder_exponent(x, A, points.empty() ? 2 : points.front().dim);
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& A) {
    auto rows = nlohmann::json::array();
    for (int i = 0; i < A.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (int j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json to_json(const SingularPoint& sp) {
    std::vector<double> loc(sp.location.begin(), sp.location.begin() + sp.dim);
    std::vector<double> eig(sp.blowup.eigenvalues.data(), sp.blowup.eigenvalues.data() + sp.blowup.eigenvalues.size());
    return {{"location", loc},
            {"A", matrix_json(sp.blowup.p.A)},
            {"eigenvalues", eig},
            {"m", sp.m},
            {"lambda_star", sp.lambda_star},
            {"confidence", sp.confidence},
            {"lambda_margin", sp.lambda_margin},
            {"label", to_string(sp.label)},
            {"isolated", sp.isolated},
            {"sigma_plus", sp.sigma_plus},
            {"sigma_plus_eigen", sp.sigma_plus_eigen},
            {"sigma_plus_density", sp.sigma_plus_density},
            {"sigma_plus_ambiguous", sp.sigma_plus_ambiguous},
            {"density_radii", sp.density_radii},
            {"densities", sp.densities},
            {"fit_residual", sp.fit_residual}};
}

/// One JSON object per line.
inline std::string to_jsonl(const std::vector<SingularPoint>& points) {
    std::string out;
    for (const auto& p : points) out += to_json(p).dump() + "\n";
    return out;
}

inline std::string to_csv(const HolderFit& f) {
    std::ostringstream os;
    os.precision(17);
    os << "beta,C,r2,pairs,constant_map\n";
    if (f.constant_map)
        os << ",";
    else
        os << f.beta << ",";
    os << f.C << "," << f.r2 << "," << f.pairs << "," << (f.constant_map ? 1 : 0) << "\n";
    return os.str();
}

}  // namespace oblab
