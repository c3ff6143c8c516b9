#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oblab/error.hpp"
#include "oblab/field.hpp"
#include "oblab/measures.hpp"
#include "oblab/polynomial.hpp"
#include "oblab/quadrature.hpp"

namespace oblab {

/// Almgren frequency r * int_{B_r} |grad v|^2 / int_{dB_r} v^2.
inline double almgren(const ScalarField& v, const Point& x0, double r) {
    const double den = sphere_mean_sq(v, x0, r);
    if (!(den >= 1e-30 * v.scale() * v.scale()) || den == 0.0)
        throw Error(ErrorKind::degenerate_denominator,
                    "boundary mass " + std::to_string(den) + " vanishes at r = " + std::to_string(r));
    return r * ball_dirichlet(v, x0, r) / den;
}

/// Weiss energy r^-(n-2+2l) int |grad v|^2 - l r^-(n-1+2l) int_{dB_r} v^2.
inline double weiss(const ScalarField& v, const Point& x0, double r, double lambda) {
    const int n = v.dim();
    const double energy = ball_dirichlet(v, x0, r) * std::pow(r, -(n - 2.0 + 2.0 * lambda));
    const double mass = sphere_mean_sq(v, x0, r) * std::pow(r, -(n - 1.0 + 2.0 * lambda));
    return energy - lambda * mass;
}

/// Monneau boundary mass r^-(n-1+2l) int_{dB_r} v^2.
inline double monneau(const ScalarField& v, const Point& x0, double r, double lambda) {
    return sphere_mean_sq(v, x0, r) * std::pow(r, -(v.dim() - 1.0 + 2.0 * lambda));
}

struct LambdaTrack {
    double lambda = 2.0;
    std::vector<double> weiss;
    std::vector<double> monneau;
    double weiss_scale = 0.0;   ///< largest energy term; W itself may vanish identically
    double monneau_scale = 0.0;
};

struct FrequencyProfile {
    Point center{0.0, 0.0, 0.0};
    std::vector<double> radii;
    std::vector<double> phi;
    std::vector<LambdaTrack> tracks;
    double lambda_star = 0.0;
    double confidence = 0.0;  ///< max - min of phi over [r_min, 10 r_min]
};

/// Evaluates phi and, per lambda, the Weiss and Monneau tracks on the dyadic
/// radii r_min * 2^k <= r_max.
inline FrequencyProfile profile(const ScalarField& v, const Point& x0, double r_min, double r_max,
                                const std::vector<double>& lambdas = {}) {
    if (!(r_min >= 8.0 * v.h() - 1e-12))
        throw Error(ErrorKind::radius_too_small, "profile needs r_min >= 8h = " + std::to_string(8.0 * v.h()));
    if (!(r_max > r_min)) throw Error(ErrorKind::parameter, "profile needs r_min < r_max");

    FrequencyProfile out;
    out.center = x0;
    for (double r = r_min; r <= r_max * (1.0 + 1e-12); r *= 2.0) out.radii.push_back(r);
    for (double l : lambdas) out.tracks.push_back(LambdaTrack{l, {}, {}, 0.0, 0.0});

    const int n = v.dim();
    for (double r : out.radii) {
        const double mass = sphere_mean_sq(v, x0, r);
        const double energy = ball_dirichlet(v, x0, r);
        if (!(mass > 1e-30 * v.scale() * v.scale()))
            throw Error(ErrorKind::degenerate_denominator,
                        "boundary mass vanishes at r = " + std::to_string(r));
        out.phi.push_back(r * energy / mass);
        for (auto& t : out.tracks) {
            const double e = energy * std::pow(r, -(n - 2.0 + 2.0 * t.lambda));
            const double h = mass * std::pow(r, -(n - 1.0 + 2.0 * t.lambda));
            t.weiss.push_back(e - t.lambda * h);
            t.monneau.push_back(h);
            t.weiss_scale = std::max(t.weiss_scale, std::abs(e));
            t.monneau_scale = std::max(t.monneau_scale, std::abs(h));
        }
    }
    for (double p : out.phi)
        if (!std::isfinite(p)) throw Error(ErrorKind::non_finite_sample, "frequency is not finite");

    out.lambda_star = out.phi.front();
    double lo = out.phi.front(), hi = out.phi.front();
    for (std::size_t k = 0; k < out.radii.size() && out.radii[k] <= 10.0 * r_min * (1.0 + 1e-12); ++k) {
        lo = std::min(lo, out.phi[k]);
        hi = std::max(hi, out.phi[k]);
    }
    out.confidence = hi - lo;
    return out;
}

enum class Track { phi, weiss, monneau };

struct MonotoneVerdict {
    bool monotone = true;
    double worst_violation = 0.0;  ///< largest decrease between consecutive radii, 0 if none
    double location = 0.0;         ///< smaller radius of the worst pair
    double tolerance = 0.0;
};

/// Nondecreasing in r up to 1e-3 of the track scale.
inline MonotoneVerdict check_monotone(const FrequencyProfile& p, Track track, double lambda = 2.0) {
    if (p.radii.size() < 4) throw Error(ErrorKind::insufficient_data, "monotonicity check needs at least 4 radii");
    const std::vector<double>* values = &p.phi;
    double scale = 0.0;
    if (track == Track::phi) {
        for (double x : p.phi) scale = std::max(scale, std::abs(x));
    } else {
        const auto it = std::find_if(p.tracks.begin(), p.tracks.end(),
                                     [&](const LambdaTrack& t) { return std::abs(t.lambda - lambda) < 1e-12; });
        if (it == p.tracks.end())
            throw Error(ErrorKind::parameter, "profile has no track for lambda = " + std::to_string(lambda));
        values = track == Track::weiss ? &it->weiss : &it->monneau;
        scale = track == Track::weiss ? it->weiss_scale : it->monneau_scale;
    }
    MonotoneVerdict v;
    v.tolerance = 1e-3 * scale;
    for (std::size_t k = 0; k + 1 < values->size(); ++k) {
        const double drop = (*values)[k] - (*values)[k + 1];
        if (drop > v.worst_violation) {
            v.worst_violation = drop;
            v.location = p.radii[k];
        }
    }
    v.monotone = v.worst_violation <= v.tolerance;
    return v;
}

struct IdentityVerdict {
    bool holds = true;
    double min_on_coincidence = std::numeric_limits<double>::infinity();
    double max_off = 0.0;
    std::size_t coincidence_vertices = 0;
};

/// Checks w Lap w = p chi_{u=0} >= 0 for w = u - p on the grid. The
/// coincidence set is taken from `variant`, so the same check runs on
/// classical, no-sign and superconductivity solutions.
inline IdentityVerdict w_laplace_identity(const ScalarField& u, const QuadraticForm& p, Variant variant = Variant::classical,
                                          Thresholds th = {}, double tol = 1e-6) {
    if (p.dim() != u.dim() || !p.in_p_plus(1e-9))
        throw Error(ErrorKind::parameter, "identity check needs p in P+ of matching dimension");
    const auto& spec = u.spec();
    const auto lambda = coincidence_mask(u, variant, th);
    const auto layer = dilate(spec, interface_mask(spec, lambda), 2);
    const double lap_p = p.laplacian();
    IdentityVerdict v;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (!spec.is_interior(spec.multi_index(i))) continue;
        const double w = u[i] - p(spec.vertex(i));
        const double wlw = w * (u.laplacian_at(i) - lap_p);
        if (lambda[i]) {
            ++v.coincidence_vertices;
            v.min_on_coincidence = std::min(v.min_on_coincidence, wlw);
        } else if (!layer[i]) {
            v.max_off = std::max(v.max_off, std::abs(wlw));
        }
    }
    if (v.coincidence_vertices == 0) v.min_on_coincidence = 0.0;
    v.holds = v.min_on_coincidence >= -tol && v.max_off <= tol;
    return v;
}

inline std::string to_csv(const FrequencyProfile& p) {
    std::ostringstream os;
    os << std::setprecision(17) << "r,phi";
    for (const auto& t : p.tracks) os << ",w_" << t.lambda;
    for (const auto& t : p.tracks) os << ",h_" << t.lambda;
    os << "\n";
    for (std::size_t k = 0; k < p.radii.size(); ++k) {
        os << p.radii[k] << "," << p.phi[k];
        for (const auto& t : p.tracks) os << "," << t.weiss[k];
        for (const auto& t : p.tracks) os << "," << t.monneau[k];
        os << "\n";
    }
    return os.str();
}

inline nlohmann::json to_json(const MonotoneVerdict& v) {
    return {{"monotone", v.monotone}, {"worst_violation", v.worst_violation},
            {"location", v.location}, {"tolerance", v.tolerance}};
}

inline nlohmann::json to_json(const IdentityVerdict& v) {
    return {{"holds", v.holds}, {"min_on_coincidence", v.min_on_coincidence},
            {"max_off", v.max_off}, {"coincidence_vertices", v.coincidence_vertices}};
}

}  // namespace oblab
