#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oblab/error.hpp"
#include "oblab/field.hpp"

namespace oblab {

/// Parameters of M_{k+1} <= M_k - C1 M_k^{2n-1} + C2 M_k^{2n-2} k^{-beta},
/// beta = 1/(2(n-1)), together with the constants C0, K0 of the decay bound
/// M_k <= C0 k^{-beta} for k >= K0.
struct RecursionParams {
    int n = 2;
    long k0 = 1;
    double M = 1.0;
    double C1 = 1.0;
    double C2 = 1.0;
    double C0 = 0.0;
    long K0 = 1;
    std::array<double, 4> lower_bounds{};  ///< smallest C0 allowed by each inequality
    std::array<double, 4> slacks{};        ///< rhs - lhs of each inequality at C0

    double beta() const { return 1.0 / (2.0 * (n - 1)); }
};

namespace detail {

/// The four conditions on C0, each as (lhs, rhs) with lhs <= rhs required.
inline std::array<std::pair<double, double>, 4> c0_conditions(int n, long k0, double M, double C1, double C2,
                                                               double C0) {
    const double beta = 1.0 / (2.0 * (n - 1));
    return {{
        {static_cast<double>(std::max(k0, 1L)), 2.0 * C2 * std::pow(C0 / 2.0, 2 * n - 3)},
        {M, std::pow(std::pow(2.0, 2 * n - 5) / C2, 1.0 / (2 * n - 2)) * std::pow(C0, 1.0 / (2 * n - 2))},
        {2.0, (2 * n - 2) * C1 * std::pow(C0, 2 * n - 2) / std::pow(2.0, 2 * n)},
        {std::pow(2.0, beta * (2 * n - 1)), C1 * C0 / (std::pow(2.0, 2 * n) * C2)},
    }};
}

}  // namespace detail

/// Smallest C0 (to 1e-6) meeting all four conditions: each condition is
/// monotone in C0, so each gets its own bisection and C0 is the largest of
/// the four thresholds. K0 = ceil(2 C2 (C0/2)^{2n-3}).
inline RecursionParams derive_constants(int n, long k0, double M, double C1, double C2) {
    if (n < 2 || k0 < 1 || !(M > 0.0) || !(C1 > 0.0) || !(C2 > 0.0))
        throw Error(ErrorKind::parameter, "recursion needs n >= 2, k0 >= 1 and M, C1, C2 > 0");
    RecursionParams p{n, k0, M, C1, C2};
    for (int i = 0; i < 4; ++i) {
        auto ok = [&](double c0) {
            const auto cond = detail::c0_conditions(n, k0, M, C1, C2, c0)[i];
            return cond.first <= cond.second;
        };
        double hi = 1.0;
        while (!ok(hi)) hi *= 2.0;
        double lo = 0.0;
        while (hi - lo > 1e-9 * std::max(1.0, hi)) {
            const double mid = 0.5 * (lo + hi);
            (ok(mid) ? hi : lo) = mid;
        }
        p.lower_bounds[i] = hi;
    }
    p.C0 = *std::max_element(p.lower_bounds.begin(), p.lower_bounds.end());
    const auto cond = detail::c0_conditions(n, k0, M, C1, C2, p.C0);
    for (int i = 0; i < 4; ++i) p.slacks[i] = cond[i].second - cond[i].first;
    p.K0 = static_cast<long>(std::ceil(2.0 * C2 * std::pow(p.C0 / 2.0, 2 * n - 3) - 1e-9));
    return p;
}

struct RecursionSequence {
    long k0 = 1;
    std::vector<double> values;      ///< values[i] = M_{k0 + i}
    long monotonicity_breaks = 0;    ///< steps that rose although C1 M_k >= C2 k^{-beta}

    double at(long k) const { return values.at(static_cast<std::size_t>(k - k0)); }
    long last_k() const { return k0 + static_cast<long>(values.size()) - 1; }
};

/// Streams M_{k0}, M_{k0+1}, ..., M_{k_max} of the equality recursion,
/// clamped to [0, M], as visit(k, M_k, k^-beta). Returns the number of steps
/// that rose although C1 M_k >= C2 k^-beta.
template <class Visit>
long iterate_recursion(const RecursionParams& p, long k_max, Visit&& visit) {
    const double beta = p.beta();
    long breaks = 0;
    double m = p.M;
    for (long k = p.k0;; ++k) {
        const double decay = std::pow(static_cast<double>(k), -beta);
        visit(k, m, decay);
        if (k == k_max) break;
        const double mp = std::pow(m, 2 * p.n - 2);
        const double next = std::clamp(m - p.C1 * mp * m + p.C2 * mp * decay, 0.0, p.M);
        if (p.C1 * m >= p.C2 * decay && next > m) ++breaks;
        m = next;
    }
    return breaks;
}

/// Iterates the recursion with equality from M_{k0} = M, clamped to [0, M].
inline RecursionSequence worst_case_sequence(const RecursionParams& p, long k_max) {
    if (k_max < p.K0 + 100)
        throw Error(ErrorKind::parameter, "k_max must reach at least K0 + 100 = " + std::to_string(p.K0 + 100));
    RecursionSequence s;
    s.k0 = p.k0;
    s.values.reserve(static_cast<std::size_t>(k_max - p.k0 + 1));
    s.monotonicity_breaks = iterate_recursion(p, k_max, [&](long, double m, double) { s.values.push_back(m); });
    return s;
}

struct BoundVerdict {
    bool holds = true;
    std::optional<long> first_violation;
    long violations = 0;
    double min_margin = 0.0;   ///< min over k >= K0 of C0 k^-beta - M_k
    long min_margin_at = 0;
    double max_ratio = 0.0;    ///< max of M_k / (C0 k^-beta)
    std::vector<std::pair<long, double>> margin_profile;  ///< margin at K0 and at powers of ten
};

/// Checks M_k <= C0 k^{-beta} for every k >= K0 in the sequence.
inline BoundVerdict verify_bound(const RecursionSequence& s, const RecursionParams& p) {
    if (s.k0 > p.K0) throw Error(ErrorKind::parameter, "sequence starts after K0");
    BoundVerdict v;
    v.min_margin = std::numeric_limits<double>::infinity();
    const double beta = p.beta();
    long next_mark = p.K0;
    for (long k = p.K0; k <= s.last_k(); ++k) {
        const double bound = p.C0 * std::pow(static_cast<double>(k), -beta);
        const double mk = s.at(k);
        const double margin = bound - mk;
        if (margin < 0.0) {
            if (!v.first_violation) v.first_violation = k;
            ++v.violations;
        }
        if (margin < v.min_margin) {
            v.min_margin = margin;
            v.min_margin_at = k;
        }
        v.max_ratio = std::max(v.max_ratio, mk / bound);
        if (k == next_mark) {
            v.margin_profile.emplace_back(k, margin);
            long p10 = 1;
            while (p10 <= k) p10 *= 10;
            next_mark = p10;
        }
    }
    v.holds = v.violations == 0;
    return v;
}

struct VerificationRow {
    RecursionParams params;
    long k_max = 0;
    long checked = 0;              ///< k in [K0, k_max]; 0 when K0 > k_max
    long violations = 0;
    std::optional<long> first_violation;
    double min_margin = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    long extended_violations = 0;  ///< same bound tested from k0, before K0 where nothing is claimed
    long monotonicity_breaks = 0;

    bool holds() const { return violations == 0; }
};

/// Brute force over n x C1 x C2 x M x k0: each equality sequence is streamed
/// to k_max and M_k <= C0 k^-beta is checked for K0 <= k <= k_max.
inline std::vector<VerificationRow> verification_matrix(const std::vector<int>& ns, const std::vector<double>& c1s,
                                                        const std::vector<double>& c2s, const std::vector<double>& ms,
                                                        const std::vector<long>& k0s, long k_max) {
    std::vector<VerificationRow> rows;
    for (int n : ns)
        for (double c1 : c1s)
            for (double c2 : c2s)
                for (double m : ms)
                    for (long k0 : k0s) {
                        VerificationRow row;
                        row.params = derive_constants(n, k0, m, c1, c2);
                        row.k_max = k_max;
                        const auto& p = row.params;
                        row.monotonicity_breaks = iterate_recursion(p, k_max, [&](long k, double mk, double decay) {
                            const double bound = p.C0 * decay;
                            if (mk > bound) ++row.extended_violations;
                            if (k < p.K0) return;
                            ++row.checked;
                            if (mk > bound) {
                                if (!row.first_violation) row.first_violation = k;
                                ++row.violations;
                            }
                            row.min_margin = std::min(row.min_margin, bound - mk);
                            row.max_ratio = std::max(row.max_ratio, mk / bound);
                        });
                        rows.push_back(row);
                    }
    return rows;
}

inline std::string to_csv(const std::vector<VerificationRow>& rows) {
    std::ostringstream os;
    os.precision(12);
    os << "n,k0,M,C1,C2,C0,K0,k_max,checked,holds,first_violation,violations,min_margin,max_ratio,"
          "extended_violations,monotonicity_breaks\n";
    for (const auto& r : rows) {
        const auto& p = r.params;
        os << p.n << "," << p.k0 << "," << p.M << "," << p.C1 << "," << p.C2 << "," << p.C0 << "," << p.K0 << ","
           << r.k_max << "," << r.checked << "," << (r.holds() ? 1 : 0) << ",";
        if (r.first_violation) os << *r.first_violation;
        os << "," << r.violations << ",";
        if (r.checked > 0) os << r.min_margin;
        os << "," << r.max_ratio << "," << r.extended_violations << "," << r.monotonicity_breaks << "\n";
    }
    return os.str();
}

struct MkReport {
    std::vector<int> ks;
    std::vector<double> values;
    std::string warning;     ///< set when the requested k range exceeded the grid resolution
    double fitted_rate = 0.0;  ///< b in M_k ~ C k^-b, over positive entries
    double fitted_C = 0.0;
    int fitted_points = 0;
};

/// M_k = max(0, sup over y of -inf_{B_{2^-k}(y)} D_ii u), with D_ii the
/// central second difference at grid vertices. Radii below 8h are dropped.
inline MkReport measure_Mk(const ScalarField& u, const std::vector<Point>& gamma, int axis, int k_first, int k_last) {
    const auto& spec = u.spec();
    if (axis < 0 || axis >= spec.dim) throw Error(ErrorKind::parameter, "axis out of range");
    if (gamma.empty()) throw Error(ErrorKind::insufficient_data, "measure_Mk needs free boundary points");
    if (k_first > k_last) throw Error(ErrorKind::parameter, "empty k range");
    MkReport rep;
    const double h = spec.spacing();
    for (int k = k_first; k <= k_last; ++k) {
        const double rho = std::ldexp(1.0, -k);
        if (rho < 8.0 * h - 1e-12) {
            rep.warning = "k range truncated at k = " + std::to_string(k - 1) + " (2^-k below 8h)";
            break;
        }
        double worst = 0.0;
        for (const auto& y : gamma) {
            std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
            for (int d = 0; d < spec.dim; ++d) {
                lo[d] = std::max(1, static_cast<int>(std::ceil((y[d] - rho + 1.0) / h - 1e-9)));
                hi[d] = std::min(spec.points - 2, static_cast<int>(std::floor((y[d] + rho + 1.0) / h + 1e-9)));
            }
            double inf = std::numeric_limits<double>::infinity();
            std::array<int, 3> ijk{0, 0, 0};
            std::function<void(int)> walk = [&](int d) {
                if (d == spec.dim) {
                    const std::size_t idx = spec.index(ijk);
                    if (distance(spec.vertex(idx), y, spec.dim) <= rho) inf = std::min(inf, u.second_difference_at(idx, axis));
                    return;
                }
                for (ijk[d] = lo[d]; ijk[d] <= hi[d]; ++ijk[d]) walk(d + 1);
            };
            walk(0);
            if (std::isfinite(inf)) worst = std::max(worst, -inf);
        }
        rep.ks.push_back(k);
        rep.values.push_back(worst);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < rep.ks.size(); ++i) {
        if (rep.values[i] <= 0.0) continue;
        const double x = std::log(static_cast<double>(rep.ks[i])), yv = std::log(rep.values[i]);
        sx += x;
        sy += yv;
        sxx += x * x;
        sxy += x * yv;
        ++rep.fitted_points;
    }
    if (rep.fitted_points >= 2) {
        const double k = rep.fitted_points;
        const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
        rep.fitted_rate = -slope;
        rep.fitted_C = std::exp((sy - slope * sx) / k);
    }
    return rep;
}

}  // namespace oblab
