#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <vector>

#include "oblab/error.hpp"
#include "oblab/field.hpp"
#include "oblab/measures.hpp"

namespace oblab {

struct SolverConfig {
    GridSpec spec{2, 129};
    std::function<double(const Point&)> boundary;
    Variant variant = Variant::no_sign;
    double damping = 0.5;            ///< theta in (0, 1]
    double tolerance = 1e-10;        ///< tau_fix
    int max_outer = 400;
    long max_inner_sweeps = 200000;
    Thresholds thresholds{};
    std::optional<ScalarField> initial;

    void validate() const {
        spec.validate();
        if (!boundary) throw Error(ErrorKind::parameter, "solver needs boundary data");
        if (!(tolerance > 0.0)) throw Error(ErrorKind::parameter, "tolerance must be positive");
        if (!(damping > 0.0 && damping <= 1.0)) throw Error(ErrorKind::parameter, "damping must lie in (0, 1]");
        if (max_outer < 1) throw Error(ErrorKind::parameter, "max_outer must be positive");
        if (initial && !(initial->spec() == spec))
            throw Error(ErrorKind::parameter, "initial field lives on a different grid");
    }
};

struct SolveReport {
    int iterations = 0;                     ///< outer iterations (sweeps for the classical variant)
    long inner_sweeps = 0;
    double residual = 0.0;                  ///< max |Lap u - chi_Omega| off the 2h layer around Gamma
    std::vector<std::size_t> coincidence_history;
    std::size_t coincidence_count = 0;
    std::uint64_t coincidence_hash = 0;     ///< identifies which fixed point was reached
    bool converged = false;
    bool oscillating = false;
};

struct SolveResult {
    ScalarField field;
    SolveReport report;
};

/// FNV-1a over the coincidence mask.
inline std::uint64_t mask_hash(const std::vector<std::uint8_t>& mask) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto b : mask) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

/// |Lap_h u - chi_Omega| at interior vertices; vertices within 2h of the
/// coincidence interface and boundary vertices hold 0.
inline ScalarField residual_map(const ScalarField& u, Variant variant, Thresholds th = {}) {
    const auto& spec = u.spec();
    const auto lambda = coincidence_mask(u, variant, th);
    const auto layer = dilate(spec, interface_mask(spec, lambda), 2);
    std::vector<double> out(spec.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (layer[i] || !spec.is_interior(spec.multi_index(i))) continue;
        out[i] = std::abs(u.laplacian_at(i) - (lambda[i] ? 0.0 : 1.0));
    }
    return ScalarField(spec, std::move(out), "residual");
}

namespace detail {

/// Calls fn(idx) for every interior vertex of one red-black color.
template <class Fn>
inline void for_each_colored(const GridSpec& spec, int color, Fn&& fn) {
    const int n = spec.points;
    if (spec.dim == 2) {
        for (int i = 1; i < n - 1; ++i) {
            const std::size_t row = static_cast<std::size_t>(i) * n;
            for (int j = 1 + ((i + 1 + color) & 1); j < n - 1; j += 2) fn(row + j);
        }
    } else {
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) {
                const std::size_t row = (static_cast<std::size_t>(i) * n + j) * n;
                for (int k = 1 + ((i + j + 1 + color) & 1); k < n - 1; k += 2) fn(row + k);
            }
    }
}

class Relaxation {
public:
    explicit Relaxation(const GridSpec& spec) : spec_(spec), h2_(spec.spacing() * spec.spacing()) {
        omega_ = 2.0 / (1.0 + std::sin(std::numbers::pi / (spec.points - 1)));
        for (int d = 0; d < spec.dim; ++d) strides_[d] = spec.stride(d);
    }

    double neighbour_sum(const std::vector<double>& u, std::size_t i) const {
        double s = 0.0;
        for (int d = 0; d < spec_.dim; ++d) s += u[i + strides_[d]] + u[i - strides_[d]];
        return s;
    }

    /// Smallest residual the stencil can resolve for values of size |u|: the
    /// 2n + 1 rounding errors of the neighbour sum are amplified by 1/h^2.
    double rounding_floor(const std::vector<double>& u) const {
        double m = 0.0;
        for (double x : u) m = std::max(m, std::abs(x));
        return 4.0 * std::numeric_limits<double>::epsilon() * std::max(m, 1.0) * (2.0 * spec_.dim + 1.0) / h2_;
    }

    /// Red-black SOR on Lap u = f (projected onto u >= 0 when requested) until
    /// the max-norm residual drops below max(tol, rounding floor), or stops
    /// improving. Returns sweeps used.
    long solve(std::vector<double>& u, const std::vector<double>& f, double tol, long max_sweeps, bool project) const {
        const double diag = 2.0 * spec_.dim;
        const double target = std::max(tol, rounding_floor(u));
        double best = std::numeric_limits<double>::infinity();
        long best_at = 0;
        long sweeps = 0;
        while (sweeps < max_sweeps) {
            for (int color = 0; color < 2; ++color) {
                for_each_colored(spec_, color, [&](std::size_t i) {
                    const double gs = (neighbour_sum(u, i) - h2_ * f[i]) / diag;
                    double v = u[i] + omega_ * (gs - u[i]);
                    if (project && v < 0.0) v = 0.0;
                    u[i] = v;
                });
            }
            ++sweeps;
            if (sweeps % 8 != 0) continue;
            const double r = residual(u, f, project);
            if (r <= target) break;
            if (r < 0.5 * best) {
                best = r;
                best_at = sweeps;
            } else if (sweeps - best_at > 4096 && r <= 16.0 * target) {
                break;  // stagnated at the rounding level
            }
        }
        return sweeps;
    }

    /// Max-norm residual of Lap u = f; with projection, the complementarity
    /// residual (|Lap u - f| where u > 0, positive part of Lap u - f where u = 0).
    double residual(const std::vector<double>& u, const std::vector<double>& f, bool project) const {
        const double diag = 2.0 * spec_.dim;
        double worst = 0.0;
        for (int color = 0; color < 2; ++color)
            for_each_colored(spec_, color, [&](std::size_t i) {
                const double r = (neighbour_sum(u, i) - diag * u[i]) / h2_ - f[i];
                worst = std::max(worst, project && u[i] <= 0.0 ? std::max(0.0, r) : std::abs(r));
            });
        return worst;
    }

private:
    GridSpec spec_;
    double h2_;
    double omega_;
    std::array<std::size_t, 3> strides_{0, 0, 0};
};

}  // namespace detail

/// Grid solver for Lap u = chi_Omega(u).
///
/// classical: projected red-black SOR for Lap u = 1 on {u > 0}, u >= 0.
/// no_sign / superconductivity: damped fixed point. From u^k take the
/// discrete coincidence set, solve the Poisson problem with right-hand side
/// chi of its complement, and set u^{k+1} = (1 - theta) u^k + theta u~. Stops
/// once the update is below tau * scale, the coincidence set has been stable
/// for 3 iterations and the residual is within 10 tau.
///
/// A set that cycles (an isolated vertex at a degenerate zero flips in and out
/// because pinning it lifts u above the threshold) is frozen to the vertices
/// shared by every mask of the cycle. The result still has to pass the
/// residual check, and the report keeps the oscillating flag.
inline SolveResult solve(const SolverConfig& cfg) {
    cfg.validate();
    const auto& spec = cfg.spec;
    const std::size_t size = spec.size();
    detail::Relaxation relax(spec);

    std::vector<double> u(size, 0.0);
    for (std::size_t i = 0; i < size; ++i) {
        if (spec.is_interior(spec.multi_index(i))) continue;
        u[i] = cfg.boundary(spec.vertex(i));
        if (!std::isfinite(u[i])) throw Error(ErrorKind::parameter, "boundary data is not finite");
        if (cfg.variant == Variant::classical && u[i] < 0.0)
            throw Error(ErrorKind::parameter, "classical variant needs nonnegative boundary data");
    }

    const double inner_tol = cfg.tolerance / 10.0;
    std::vector<double> ones(size, 1.0);
    SolveReport rep;

    if (cfg.initial) {
        for (std::size_t i = 0; i < size; ++i)
            if (spec.is_interior(spec.multi_index(i))) u[i] = cfg.initial->values()[i];
    } else {
        rep.inner_sweeps += relax.solve(u, ones, inner_tol, cfg.max_inner_sweeps, false);
    }

    if (cfg.variant == Variant::classical) {
        for (double& x : u) x = std::max(0.0, x);
        const long sweeps = relax.solve(u, ones, inner_tol, cfg.max_inner_sweeps, true);
        rep.inner_sweeps += sweeps;
        rep.iterations = static_cast<int>(std::min<long>(sweeps, std::numeric_limits<int>::max()));
        ScalarField field(spec, std::move(u), "classical");
        const auto lambda = coincidence_mask(field, Variant::classical, cfg.thresholds);
        rep.coincidence_count = static_cast<std::size_t>(std::count(lambda.begin(), lambda.end(), 1));
        rep.coincidence_history.push_back(rep.coincidence_count);
        rep.coincidence_hash = mask_hash(lambda);
        const auto res = residual_map(field, Variant::classical, cfg.thresholds);
        rep.residual = res.scale();
        rep.converged = rep.residual <= 10.0 * cfg.tolerance;
        return {std::move(field), rep};
    }

    std::vector<double> target = u;  // u~, warm start for each Poisson solve
    std::vector<double> rhs(size, 1.0);
    std::map<std::uint64_t, int> seen;                   // mask hash -> last iteration
    std::deque<std::vector<std::uint8_t>> recent;        // masks of the last few iterations
    std::optional<std::vector<std::uint8_t>> frozen;
    std::uint64_t previous = 0;
    int stable = 0;
    double last_check = std::numeric_limits<double>::infinity();
    ScalarField current(spec, u, to_string(cfg.variant));
    for (int k = 0; k < cfg.max_outer; ++k) {
        auto lambda = frozen ? *frozen : coincidence_mask(current, cfg.variant, cfg.thresholds);
        const std::uint64_t hash = mask_hash(lambda);
        rep.coincidence_history.push_back(static_cast<std::size_t>(std::count(lambda.begin(), lambda.end(), 1)));
        if (k > 0 && hash == previous) {
            ++stable;
        } else {
            stable = 0;
            const auto it = seen.find(hash);
            if (it != seen.end()) {
                rep.oscillating = true;
                // A cycle: keep only the vertices common to every mask in it.
                const int period = k - it->second;
                if (!frozen && period <= static_cast<int>(recent.size())) {
                    for (int j = 0; j < period; ++j) {
                        const auto& m = recent[recent.size() - 1 - j];
                        for (std::size_t i = 0; i < size; ++i) lambda[i] &= m[i];
                    }
                    frozen = lambda;
                }
            }
        }
        seen[hash] = k;
        previous = hash;
        recent.push_back(lambda);
        if (recent.size() > 16) recent.pop_front();

        for (std::size_t i = 0; i < size; ++i) rhs[i] = lambda[i] ? 0.0 : 1.0;
        rep.inner_sweeps += relax.solve(target, rhs, inner_tol, cfg.max_inner_sweeps, false);

        double update = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            const double next = (1.0 - cfg.damping) * u[i] + cfg.damping * target[i];
            update = std::max(update, std::abs(next - u[i]));
            u[i] = next;
        }
        current = ScalarField(spec, u, to_string(cfg.variant));
        rep.iterations = k + 1;
        if (update < cfg.tolerance * std::max(current.scale(), 1e-300) && stable >= 3) {
            // The damped iterate trails u~ by update / theta, amplified by the
            // stencil, so keep going while the residual still falls.
            const double res = residual_map(current, cfg.variant, cfg.thresholds).scale();
            if (res <= cfg.tolerance || res > 0.75 * last_check) {
                rep.converged = res <= 10.0 * cfg.tolerance;
                break;
            }
            last_check = res;
        }
    }
    // Record the set the last Poisson solve actually used.
    const auto lambda = frozen ? *frozen : coincidence_mask(current, cfg.variant, cfg.thresholds);
    rep.coincidence_count = static_cast<std::size_t>(std::count(lambda.begin(), lambda.end(), 1));
    rep.coincidence_hash = mask_hash(lambda);
    rep.residual = residual_map(current, cfg.variant, cfg.thresholds).scale();
    return {std::move(current), rep};
}

}  // namespace oblab
