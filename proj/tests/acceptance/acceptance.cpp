// Acceptance run: one PASS/FAIL line per criterion.
//
//   oblab_acceptance            all criteria
//   oblab_acceptance 2 5        selected criteria
//
// Exit code 0 iff every selected criterion passed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oblab/oblab.hpp"

using namespace oblab;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[fail] ";
        }
        detail << what << "; ";
    }
};

std::string num(double v, int digits = 6) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

ScalarField sampled(const std::string& ref, int dim, int N) {
    const auto fx = make_fixture(ref, dim);
    return sample(GridSpec{dim, N}, fx.eval, fx.name);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Frequency of r^lambda sin(lambda theta) at three radii.
Outcome frequency_calibration() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (double lambda : {2.0, 2.5, 3.0, 3.5, 4.0}) {
        std::ostringstream ref;
        ref << "homogeneous:lambda=" << lambda << ",profile=sin";
        const auto v = sampled(ref.str(), 2, 513);
        for (double r : {0.1, 0.2, 0.4}) worst = std::max(worst, std::abs(almgren(v, {0, 0, 0}, r) - lambda));
    }
    const double t = seconds_since(t0);
    o.check(worst <= 1e-3, "max |Phi - lambda| = " + num(worst, 3));
    o.check(t < 10.0, "runtime " + num(t, 3) + " s");
    return o;
}

// lambda_* at the cusp solutions, N = 1025.
Outcome cusp_frequencies() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    for (auto [mu, expected] : {std::pair{3.0, 2.5}, std::pair{7.0, 4.5}}) {
        const auto u = sampled("cusp:mu=" + num(mu), 2, 1025);
        const auto sp = classify(u, {0, 0, 0});
        o.check(std::abs(sp.lambda_star - expected) <= 0.05,
                "mu=" + num(mu) + ": lambda_* = " + num(sp.lambda_star) + " (want " + num(expected) + ")");
    }
    const double t = seconds_since(t0);
    o.check(t < 120.0, "runtime " + num(t, 3) + " s");
    return o;
}

// Phi, W and H tracks through the monotonicity suite of the experiment runner.
Outcome monotonicity() {
    Outcome o;
    const std::vector<std::pair<std::string, int>> cases = {
        {"cusp:mu=3", 1025}, {"cusp:mu=7", 1025}, {"perturbed:p=e1,h=im3,eps=0.01", 513},
        {"perturbed:p=e1,h=re4,eps=0.01", 513}};
    const auto out = fs::temp_directory_path() / "oblab_acceptance_monotonicity";
    for (const auto& [ref, N] : cases) {
        const auto cfg = ExperimentConfig::parse("kind = monotonicity-suite\nfixture = " + ref + "\ngrid = " +
                                                 std::to_string(N) + "\np_samples = 8\nseed = 1\n");
        const auto rep = run_experiment(cfg, out);
        std::size_t failed = 0;
        std::string first;
        for (const auto& e : rep.expectations)
            if (!e.passed && failed++ == 0) first = e.name + " (" + e.detail + ")";
        for (const auto& e : rep.errors) first += " error: " + e;
        o.check(rep.passed(), ref + ": " + std::to_string(rep.expectations.size() - failed) + "/" +
                                  std::to_string(rep.expectations.size()) + " tracks ok" +
                                  (first.empty() ? "" : ", first failure " + first));
    }
    fs::remove_all(out);
    return o;
}

// w Lap w = p chi_{u=0} on classical solutions; violated for superconductivity.
Outcome laplace_identity() {
    Outcome o;
    SolverConfig sc;
    sc.spec = GridSpec{2, 129};
    sc.variant = Variant::classical;
    sc.boundary = make_fixture("radial:R=0.5").eval;
    const auto classical = solve(sc);
    o.check(classical.report.converged, "classical solve converged");
    for (const char* p : {"iso", "e1"}) {
        const auto v = w_laplace_identity(classical.field, named_quadratic(p, 2), Variant::classical);
        o.check(v.holds && v.min_on_coincidence >= -1e-6,
                std::string("classical, p=") + p + ": min on {u=0} = " + num(v.min_on_coincidence) + " over " +
                    std::to_string(v.coincidence_vertices) + " vertices");
    }
    sc.variant = Variant::superconductivity;
    sc.boundary = make_fixture("shifted_radial:R=0.5,c=0.3").eval;
    const auto sup = solve(sc);
    const auto v = w_laplace_identity(sup.field, named_quadratic("iso", 2), Variant::superconductivity);
    o.check(v.min_on_coincidence < 0.0, "superconductivity, p=iso: min on {grad u=0} = " +
                                            num(v.min_on_coincidence) + " (negative expected)");
    return o;
}

// Classical solver against the radial exact solution.
Outcome solver_oracle() {
    Outcome o;
    const auto exact = make_fixture("radial:R=0.5");
    double previous = 0.0, previous_h = 0.0;
    for (int N : {129, 257, 513}) {
        const auto t0 = std::chrono::steady_clock::now();
        SolverConfig sc;
        sc.spec = GridSpec{2, N};
        sc.variant = Variant::classical;
        sc.boundary = exact.eval;
        const auto res = solve(sc);
        const double t = seconds_since(t0);
        double err = 0.0;
        for (std::size_t i = 0; i < sc.spec.size(); ++i)
            err = std::max(err, std::abs(res.field[i] - exact(sc.spec.vertex(i))));
        const double h = sc.spec.spacing();
        o.check(res.report.converged && err <= 5.0 * h * h,
                "N=" + std::to_string(N) + ": err/h^2 = " + num(err / (h * h), 4));
        o.check(t < 60.0, "runtime " + num(t, 3) + " s");
        if (previous > 0.0) {
            const double order = std::log(previous / err) / std::log(previous_h / h);
            o.check(order >= 1.8, "order " + num(order, 4));
        }
        previous = err;
        previous_h = h;
    }
    return o;
}

// Round trip of a lambda = 2 deficit with the block structure, plus the sign
// of the integral over sampled P+.
Outcome blowup_structure() {
    Outcome o;
    const auto fx = make_fixture("structured:m=1,t=1,eps=0.01,seed=11", 3);
    const auto u = sample(GridSpec{3, 65}, fx.eval, fx.name);
    const auto p_star = BlowupPolynomial::from(*fx.truth.blowup);
    const auto radii = default_radii(u, {0, 0, 0});
    const auto q = almgren_blowup(u, p_star, {0, 0, 0}, {radii.front(), radii.back()}, 2.0);
    o.check(q.structure.has_value(), "structure extracted");
    if (!q.structure) return o;
    const auto& s = *q.structure;
    o.check(s.n == 3 && s.m == 1, "(n, m) = (" + std::to_string(s.n) + ", " + std::to_string(s.m) + ")");
    o.check(s.t > 0.0, "t = " + num(s.t));
    o.check(s.trace_gap <= 1e-3, "|tr N - (n-m) t| = " + num(s.trace_gap, 3));
    const auto mi = monneau_inequality(q.q, p_star.p, 10000, 20240601, false);
    o.check(mi.minimum >= -1e-6, "min over " + std::to_string(mi.samples) + " P+ samples = " + num(mi.minimum));
    const auto flipped = monneau_inequality(q.q * -1.0, p_star.p, 10000, 20240601, false);
    o.check(flipped.minimum < 0.0, "control with -q reaches " + num(flipped.minimum));
    return o;
}

// Integer frequencies from perturbed blowups, with m and Sigma+ from construction.
Outcome integer_frequencies() {
    Outcome o;
    for (const char* ref : {"perturbed:p=e1,h=im3,eps=0.01", "perturbed:p=e1,h=re4,eps=0.01",
                            "perturbed:p=iso,h=re3,eps=0.01", "perturbed:p=iso,h=im4,eps=0.01"}) {
        const auto fx = make_fixture(ref, 2);
        const auto u = sample(GridSpec{2, 513}, fx.eval, fx.name);
        const auto sp = classify(u, {0, 0, 0});
        const bool plus = fx.truth.blowup->eigenvalues().minCoeff() >= 0.0;
        o.check(std::abs(sp.lambda_star - *fx.truth.frequency) <= 1e-3 && sp.m == *fx.truth.stratum &&
                    sp.sigma_plus == plus,
                std::string(ref) + ": lambda_* = " + num(sp.lambda_star, 8) + ", m = " + std::to_string(sp.m) +
                    ", sigma+ = " + (sp.sigma_plus ? "1" : "0"));
    }
    return o;
}

// Brute-force recursion bound over the parameter grid.
Outcome recursion_bound() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto spot = derive_constants(2, 1, 1.0, 1.0, 1.0);
    o.check(std::abs(spot.C0 - 45.25) <= 0.01 && spot.K0 == 46,
            "spot C0 = " + num(spot.C0, 8) + ", K0 = " + std::to_string(spot.K0));
    const auto rows = verification_matrix({2, 3, 4}, {0.5, 1, 2}, {0.5, 1, 2}, {0.5, 1}, {1, 5}, 1000000);
    long violations = 0, vacuous = 0;
    double min_slack = 1e300;
    for (const auto& r : rows) {
        violations += r.violations;
        vacuous += r.checked == 0;
        for (double sl : r.params.slacks) min_slack = std::min(min_slack, sl);
    }
    const double t = seconds_since(t0);
    o.check(rows.size() == 108 && violations == 0,
            std::to_string(rows.size()) + " rows, " + std::to_string(violations) + " violations (" +
                std::to_string(vacuous) + " rows have K0 > 10^6)");
    o.check(min_slack >= 0.0, "min slack " + num(min_slack, 3));
    o.check(t < 30.0, "runtime " + num(t, 3) + " s");
    return o;
}

// Rescaling semigroup, rotation equivariance, Phi invariances, cubic quadrature.
Outcome property_suite() {
    Outcome o;
    {
        const auto u = sampled("perturbed:p=e1,h=im3,eps=0.01", 2, 257);
        const Point x0{0.1, 0.05, 0.0};
        const auto twice = rescale(rescale(u, x0, 0.5), {0, 0, 0}, 0.5);
        const auto once = rescale(u, x0, 0.25);
        double diff = 0.0;
        for (std::size_t i = 0; i < once.spec().size(); ++i) diff = std::max(diff, std::abs(twice[i] - once[i]));
        o.check(diff <= 1e-6 * once.scale(), "rescale semigroup rel. gap " + num(diff / once.scale(), 3));
    }
    {
        const auto fx = make_fixture("perturbed:p=e1,h=im3,eps=0.01", 2);
        const double a = 0.3;
        Eigen::MatrixXd R(2, 2);
        R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        const auto base = sample(GridSpec{2, 257}, fx.eval, "base");
        const auto turned = sample(GridSpec{2, 257}, [&](const Point& x) {
            return fx.eval({R(0, 0) * x[0] + R(1, 0) * x[1], R(0, 1) * x[0] + R(1, 1) * x[1], 0.0});
        }, "rotated");
        const auto s0 = classify(base, {0, 0, 0});
        const auto s1 = classify(turned, {0, 0, 0});
        const double gap = (s1.blowup.p.A - R * s0.blowup.p.A * R.transpose()).cwiseAbs().maxCoeff();
        o.check(s0.m == s1.m && s0.label == s1.label && s0.sigma_plus == s1.sigma_plus && gap <= 1e-3,
                "rotation: labels equal, |A' - R A R^T| = " + num(gap, 3));
    }
    {
        const auto v = sampled("homogeneous:lambda=3,profile=sin", 2, 257);
        const double phi = almgren(v, {0.05, 0.02, 0}, 0.3);
        double worst = 0.0;
        for (double alpha : {-3.0, 1e-3, 7.0})
            worst = std::max(worst, std::abs(almgren(scaled(v, alpha), {0.05, 0.02, 0}, 0.3) - phi) / phi);
        o.check(worst <= 1e-12, "Phi(alpha v) rel. gap " + num(worst, 3));
    }
    {
        // v(c x) for c = 1/2 and 2: sample the dilated function directly.
        const auto fx = make_fixture("homogeneous:lambda=2.5,profile=sin", 2);
        const Point x0{0.04, 0.0, 0.0};
        double worst = 0.0;
        const double ref = almgren(sample(GridSpec{2, 513}, fx.eval, "v"), x0, 0.2);
        for (double c : {0.5, 2.0}) {
            const auto vc = sample(GridSpec{2, 513}, [&](const Point& x) {
                return fx.eval({c * x[0], c * x[1], 0.0});
            }, "v(c x)");
            worst = std::max(worst, std::abs(almgren(vc, {x0[0] / c, x0[1] / c, 0.0}, 0.2 / c) - ref) / ref);
        }
        o.check(worst <= 1e-6, "Phi scaling rel. gap " + num(worst, 3));
    }
    {
        const Point c2{0.1, -0.2, 0.0};
        const auto v2 = sample(GridSpec{2, 129}, [&](const Point& x) { return std::pow(x[0] - c2[0], 3); }, "x^3");
        const double r = 0.5, pi = std::numbers::pi;
        const double e_s = std::abs(sphere_mean_sq(v2, c2, r) / (5.0 * pi / 8.0 * std::pow(r, 7)) - 1.0);
        const double e_b = std::abs(ball_dirichlet(v2, c2, r) / (9.0 * pi / 8.0 * std::pow(r, 6)) - 1.0);
        const Point c3{0.05, 0.0, -0.1};
        const auto v3 = sample(GridSpec{3, 65}, [&](const Point& x) {
            return (x[0] - c3[0]) * (x[1] - c3[1]) * (x[2] - c3[2]);
        }, "xyz");
        const double r3 = 0.4;
        const double f_s = std::abs(sphere_mean_sq(v3, c3, r3) / (4.0 * pi / 105.0 * std::pow(r3, 8)) - 1.0);
        const double f_b = std::abs(ball_dirichlet(v3, c3, r3) / (4.0 * pi / 35.0 * std::pow(r3, 7)) - 1.0);
        const double worst = std::max({e_s, e_b, f_s, f_b});
        o.check(worst <= 1e-8, "cubic quadrature rel. error " + num(worst, 3));
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"frequency calibration", frequency_calibration},
        {"cusp frequencies", cusp_frequencies},
        {"monotonicity", monotonicity},
        {"w Lap w identity", laplace_identity},
        {"solver oracle", solver_oracle},
        {"blowup structure", blowup_structure},
        {"integer frequencies", integer_frequencies},
        {"recursion bound", recursion_bound},
        {"property suite", property_suite},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

    bool all = true;
    for (int k : selected) {
        if (k < 1 || k > static_cast<int>(criteria.size())) {
            std::cerr << "no criterion " << k << "\n";
            return 2;
        }
        const auto& [name, fn] = criteria[k - 1];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "error: " << e.what();
        }
        all = all && o.pass;
        std::printf("criterion %d %-22s %s  %.2fs  %s\n", k, name.c_str(), o.pass ? "PASS" : "FAIL", seconds_since(t0),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
