#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "oblab/error.hpp"
#include "oblab/grid.hpp"
#include "oblab/polynomial.hpp"

namespace oblab {

/// Ground truth a fixture advertises about its distinguished point.
struct FixtureTruth {
    std::optional<double> frequency;          ///< lambda_* = Phi(0+, u - p_*)
    std::optional<QuadraticForm> blowup;      ///< p_*
    std::optional<int> stratum;               ///< m = dim {p_* = |grad p_*| = 0}
    Point singular_point{0.0, 0.0, 0.0};
    bool degenerate = false;                  ///< u coincides with p_*
    std::optional<QuadraticForm> quadratic_deficit;  ///< u - p_* when it is itself quadratic
};

struct Fixture {
    std::string name;
    int dim = 2;
    std::function<double(const Point&)> eval;
    FixtureTruth truth;

    double operator()(const Point& x) const { return eval(x); }
};

/// Polar angle measured from the positive x1-axis in [0, 2*pi).
inline double angle_positive_cut(const Point& x) {
    double th = std::atan2(x[1], x[0]);
    if (th < 0.0) th += 2.0 * std::numbers::pi;
    return th;
}

/// Polar angle in (-pi, pi].
inline double angle_negative_cut(const Point& x) { return std::atan2(x[1], x[0]); }

inline bool is_integer(double v, double tol = 1e-12) { return std::abs(v - std::round(v)) <= tol; }

// ---------------------------------------------------------------------------
// Cusp family
// ---------------------------------------------------------------------------

/// u = x2^2/2 - r^{1+mu/2} sin((1+mu/2) theta) / (1+mu/2), mu = 4k+3.
///
/// The angle is taken in [0, 2*pi): for half-integer exponents the correction
/// then vanishes on both sides of the positive x1-axis and is continuous, with
/// a gradient jump along that half-line. `terms` = 1 keeps only x2^2/2; the
/// series tail beyond the printed two terms has no known coefficients.
inline Fixture cusp(double mu, int terms = 2) {
    if (!(mu >= 3.0) || !is_integer(mu) || (static_cast<long>(std::llround(mu)) - 3) % 4 != 0)
        throw Error(ErrorKind::parameter, "cusp exponent mu must be 4k+3 with k >= 0, got " + std::to_string(mu));
    if (terms < 1 || terms > 2)
        throw Error(ErrorKind::parameter,
                    "cusp truncation must keep 1 or 2 terms; higher series coefficients are not available");
    const double lam = 1.0 + mu / 2.0;
    Fixture fx;
    fx.name = "cusp:mu=" + std::to_string(static_cast<long>(mu));
    fx.dim = 2;
    const double coef = terms >= 2 ? 1.0 / lam : 0.0;
    fx.eval = [lam, coef](const Point& x) {
        const double r = std::hypot(x[0], x[1]);
        const double corr = r > 0.0 ? coef * std::pow(r, lam) * std::sin(lam * angle_positive_cut(x)) : 0.0;
        return 0.5 * x[1] * x[1] - corr;
    };
    fx.truth.frequency = lam;
    fx.truth.blowup = QuadraticForm::diagonal({0.0, 1.0});
    fx.truth.stratum = 1;
    fx.truth.degenerate = terms < 2;
    return fx;
}

/// The homogeneous correction of the cusp, u - p_*.
inline std::function<double(const Point&)> cusp_deficit(double mu) {
    const double lam = 1.0 + mu / 2.0;
    return [lam](const Point& x) {
        const double r = std::hypot(x[0], x[1]);
        return r > 0.0 ? -std::pow(r, lam) * std::sin(lam * angle_positive_cut(x)) / lam : 0.0;
    };
}

// ---------------------------------------------------------------------------
// Homogeneous functions r^lambda g(theta)
// ---------------------------------------------------------------------------

enum class AngularProfile { sin, cos };
enum class Parity { even, odd };
enum class AngleBranch { positive_cut, negative_cut };

struct HomogeneousInfo {
    AngleBranch branch = AngleBranch::positive_cut;
    bool continuous = true;          ///< continuous across the branch cut
    bool harmonic_everywhere = true; ///< false: harmonic only off the cut
};

/// v = r^lambda g(theta) in the (x1, x2)-plane with the requested parity under
/// x2 -> -x2. The branch cut is placed on whichever half-line realizes the
/// parity, preferring a branch on which v is continuous.
inline Fixture homogeneous(double lambda, AngularProfile profile, Parity parity,
                           HomogeneousInfo* info = nullptr, int dim = 2) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::parameter, "homogeneity must be positive");
    auto g = [lambda, profile](double th) { return profile == AngularProfile::sin ? std::sin(lambda * th)
                                                                                  : std::cos(lambda * th); };
    const double two_pi = 2.0 * std::numbers::pi;
    const double sign = parity == Parity::even ? 1.0 : -1.0;

    struct Candidate {
        AngleBranch branch;
        bool realizes;
        bool continuous;
    };
    auto check = [&](AngleBranch b) {
        bool ok = true;
        for (double th : {0.3, 1.1, 2.0, 2.9}) {
            const double mirrored = b == AngleBranch::positive_cut ? g(two_pi - th) : g(-th);
            if (std::abs(mirrored - sign * g(th)) > 1e-12) ok = false;
        }
        const bool cont = b == AngleBranch::positive_cut ? std::abs(g(0.0) - g(two_pi)) < 1e-12
                                                         : std::abs(g(std::numbers::pi) - g(-std::numbers::pi)) < 1e-12;
        return Candidate{b, ok, cont};
    };
    const Candidate pos = check(AngleBranch::positive_cut), neg = check(AngleBranch::negative_cut);
    std::optional<Candidate> pick;
    for (const auto& c : {pos, neg})
        if (c.realizes && c.continuous && !pick) pick = c;
    for (const auto& c : {pos, neg})
        if (c.realizes && !pick) pick = c;
    if (!pick)
        throw Error(ErrorKind::parameter, "profile cannot realize the requested parity at lambda = " +
                                              std::to_string(lambda));

    Fixture fx;
    std::ostringstream os;
    os << "homogeneous:lambda=" << lambda << ",profile=" << (profile == AngularProfile::sin ? "sin" : "cos")
       << ",parity=" << (parity == Parity::even ? "even" : "odd");
    fx.name = os.str();
    fx.dim = dim;
    const AngleBranch branch = pick->branch;
    fx.eval = [lambda, profile, branch](const Point& x) {
        const double r = std::hypot(x[0], x[1]);
        if (r == 0.0) return 0.0;
        const double th = branch == AngleBranch::positive_cut ? angle_positive_cut(x) : angle_negative_cut(x);
        const double gv = profile == AngularProfile::sin ? std::sin(lambda * th) : std::cos(lambda * th);
        return std::pow(r, lambda) * gv;
    };
    fx.truth.frequency = lambda;
    if (info) *info = HomogeneousInfo{branch, pick->continuous, is_integer(lambda)};
    return fx;
}

// ---------------------------------------------------------------------------
// Classical obstacle problem, radial solution
// ---------------------------------------------------------------------------

/// Exact 2D classical obstacle solution with coincidence set the disk |x| <= R.
inline Fixture radial_classical(double R) {
    if (!(R > 0.0 && R < 1.0)) throw Error(ErrorKind::parameter, "radial_classical requires 0 < R < 1");
    Fixture fx;
    std::ostringstream os;
    os << "radial:R=" << R;
    fx.name = os.str();
    fx.dim = 2;
    fx.eval = [R](const Point& x) {
        const double r = std::hypot(x[0], x[1]);
        if (r <= R) return 0.0;
        return r * r / 4.0 - R * R / 4.0 - 0.5 * R * R * std::log(r / R);
    };
    return fx;
}

// ---------------------------------------------------------------------------
// Polynomial solutions p + eps h
// ---------------------------------------------------------------------------

/// Re / Im of (x1 + i x2)^d as a polynomial in `dim` variables.
inline Polynomial complex_power(int degree, bool imaginary, int dim = 2) {
    Polynomial p(dim);
    // (x1 + i x2)^d = sum_k C(d,k) x1^{d-k} (i x2)^k
    double binom = 1.0;
    for (int k = 0; k <= degree; ++k) {
        if (k > 0) binom = binom * (degree - k + 1) / k;
        const int phase = k % 4;  // i^k
        double c = 0.0;
        if (!imaginary && (phase == 0 || phase == 2)) c = phase == 0 ? binom : -binom;
        if (imaginary && (phase == 1 || phase == 3)) c = phase == 1 ? binom : -binom;
        p.add({degree - k, k, 0}, c);
    }
    return p;
}

inline int kernel_dimension(const QuadraticForm& p, double tol = 1e-9) {
    const auto ev = p.eigenvalues();
    int m = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i]) <= tol) ++m;
    return m;
}

/// u = p + eps h with p in P+ and h homogeneous harmonic of degree >= 3; the
/// deficit u - p = eps h has frequency exactly deg h.
inline Fixture perturbed(const QuadraticForm& p, const Polynomial& h, double eps) {
    if (!p.in_p_plus(1e-12))
        throw Error(ErrorKind::parameter, "base quadratic must have trace 1 and be nonnegative");
    if (p.dim() != h.dim()) throw Error(ErrorKind::parameter, "base and perturbation dimensions differ");
    if (!h.is_homogeneous() || h.degree() < 3)
        throw Error(ErrorKind::parameter, "perturbation must be homogeneous of degree >= 3");
    const double residual = h.laplacian().max_abs_coefficient();
    if (residual > 1e-12 * std::max(1.0, h.max_abs_coefficient())) {
        std::ostringstream os;
        os << "perturbation is not harmonic: max |coefficient of Laplacian| = " << residual;
        throw Error(ErrorKind::parameter, os.str());
    }
    Fixture fx;
    std::ostringstream os;
    os << "perturbed:deg=" << h.degree() << ",eps=" << eps;
    fx.name = os.str();
    fx.dim = p.dim();
    fx.eval = [p, h, eps](const Point& x) { return p(x) + eps * h(x); };
    fx.truth.frequency = static_cast<double>(h.degree());
    fx.truth.blowup = p;
    fx.truth.stratum = kernel_dimension(p);
    fx.truth.degenerate = eps == 0.0;
    return fx;
}

/// u = p_* + eps q with a degree-2 deficit in the block form of a
/// lambda_* = 2 blowup: in the eigenframe of p_* = 1/2 sum mu_i x_i^2 (first
/// n - m axes, mu_i proportional to i + 1, sum 1) the Hessian of q is t on
/// those axes and -N on the m kernel axes, N = (n - m) t / m times identity.
/// The whole picture is then rotated by R.
inline Fixture structured_deficit(int dim, int m, double t, double eps, const Eigen::MatrixXd& R) {
    if (dim < 2 || dim > 3 || m < 1 || m >= dim)
        throw Error(ErrorKind::parameter, "structured deficit needs 1 <= m < n <= 3");
    if (!(t > 0.0)) throw Error(ErrorKind::parameter, "structured deficit needs t > 0");
    if (R.rows() != dim || R.cols() != dim) throw Error(ErrorKind::parameter, "rotation has the wrong size");
    const int k = dim - m;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim, dim), Q = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < k; ++i) {
        P(i, i) = 2.0 * (i + 1) / (k * (k + 1.0));
        Q(i, i) = t;
    }
    for (int i = k; i < dim; ++i) Q(i, i) = -static_cast<double>(k) * t / m;
    const QuadraticForm p = rotated(QuadraticForm(P), R), q = rotated(QuadraticForm(Q), R);
    Fixture fx;
    std::ostringstream os;
    os << "structured:m=" << m << ",t=" << t << ",eps=" << eps;
    fx.name = os.str();
    fx.dim = dim;
    fx.eval = [p, q, eps](const Point& x) { return p(x) + eps * q(x); };
    fx.truth.frequency = 2.0;
    fx.truth.blowup = p;
    fx.truth.stratum = m;
    fx.truth.degenerate = eps == 0.0;
    fx.truth.quadratic_deficit = QuadraticForm(eps * q.A);
    return fx;
}

// ---------------------------------------------------------------------------
// Catalog: "name:key=value,key=value"
// ---------------------------------------------------------------------------

struct FixtureRef {
    std::string name;
    std::map<std::string, std::string> params;

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const auto it = params.find(key);
        if (it == params.end()) {
            if (fallback) return *fallback;
            throw Error(ErrorKind::parameter, "fixture '" + name + "' needs parameter '" + key + "'");
        }
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::parameter, "fixture parameter '" + key + "' is not a number: " + it->second);
        }
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        const auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

inline FixtureRef parse_fixture_ref(const std::string& ref) {
    FixtureRef out;
    const auto colon = ref.find(':');
    out.name = ref.substr(0, colon);
    if (colon == std::string::npos) return out;
    std::stringstream ss(ref.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorKind::parameter, "malformed fixture parameter '" + item + "' in '" + ref + "'");
        out.params[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

/// p = e1 -> x1^2/2, p = e2 -> x2^2/2, p = iso -> |x|^2/(2n).
inline QuadraticForm named_quadratic(const std::string& key, int dim) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    if (key == "e1") a(0, 0) = 1.0;
    else if (key == "e2") a(1, 1) = 1.0;
    else if (key == "iso") a = Eigen::MatrixXd::Identity(dim, dim) / dim;
    else throw Error(ErrorKind::parameter, "unknown quadratic '" + key + "' (expected e1, e2 or iso)");
    return QuadraticForm(a);
}

/// h = re<d> / im<d> -> Re / Im (x1 + i x2)^d.
inline Polynomial named_harmonic(const std::string& key, int dim) {
    if (key.size() < 3 || (key.rfind("re", 0) != 0 && key.rfind("im", 0) != 0))
        throw Error(ErrorKind::parameter, "unknown harmonic '" + key + "' (expected re<d> or im<d>)");
    const int d = std::stoi(key.substr(2));
    return complex_power(d, key[0] == 'i', dim);
}

inline Fixture make_fixture(const std::string& ref, int dim = 2) {
    const auto f = parse_fixture_ref(ref);
    auto require_2d = [&] {
        if (dim != 2) throw Error(ErrorKind::parameter, "fixture '" + f.name + "' is two-dimensional only");
    };
    if (f.name == "cusp") {
        require_2d();
        return cusp(f.number("mu"), static_cast<int>(f.number("terms", 2.0)));
    }
    if (f.name == "radial") {
        require_2d();
        return radial_classical(f.number("R"));
    }
    if (f.name == "homogeneous") {
        const auto prof = f.text("profile", "sin");
        // Defaults to the parity the profile can always realize: cos is even
        // on the negative-axis branch, sin is odd for integer degree and even
        // on the positive-axis branch otherwise.
        const bool sin_odd = prof == "sin" && is_integer(f.number("lambda"));
        const auto par = f.text("parity", sin_odd ? "odd" : "even");
        if (prof != "sin" && prof != "cos") throw Error(ErrorKind::parameter, "profile must be sin or cos");
        if (par != "even" && par != "odd") throw Error(ErrorKind::parameter, "parity must be even or odd");
        return homogeneous(f.number("lambda"), prof == "sin" ? AngularProfile::sin : AngularProfile::cos,
                           par == "even" ? Parity::even : Parity::odd, nullptr, dim);
    }
    if (f.name == "perturbed") {
        auto fx = perturbed(named_quadratic(f.text("p", "e1"), dim), named_harmonic(f.text("h", "im3"), dim),
                            f.number("eps", 1e-2));
        fx.name = ref;
        return fx;
    }
    if (f.name == "quadratic") {
        const auto p = named_quadratic(f.text("p", "e1"), dim);
        Fixture fx;
        fx.name = ref;
        fx.dim = dim;
        fx.eval = [p](const Point& x) { return p(x); };
        fx.truth.blowup = p;
        fx.truth.stratum = kernel_dimension(p);
        fx.truth.degenerate = true;
        return fx;
    }
    if (f.name == "constant") {
        const double c = f.number("c");
        Fixture fx;
        fx.name = ref;
        fx.dim = dim;
        fx.eval = [c](const Point&) { return c; };
        return fx;
    }
    if (f.name == "shifted_radial") {
        require_2d();
        const auto base = radial_classical(f.number("R"));
        const double c = f.number("c");
        Fixture fx = base;
        fx.name = ref;
        fx.eval = [base, c](const Point& x) { return c + base(x); };
        return fx;
    }
    if (f.name == "structured") {
        Eigen::MatrixXd R = Eigen::MatrixXd::Identity(dim, dim);
        if (f.params.count("seed")) {
            std::mt19937_64 rng(static_cast<std::uint64_t>(f.number("seed")));
            R = haar_rotation(dim, rng);
        }
        auto fx = structured_deficit(dim, static_cast<int>(f.number("m", 1.0)), f.number("t", 1.0),
                                     f.number("eps", 1e-2), R);
        fx.name = ref;
        return fx;
    }
    throw Error(ErrorKind::parameter, "unknown fixture '" + f.name + "'");
}

}  // namespace oblab
