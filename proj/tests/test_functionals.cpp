#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oblab/fixtures.hpp"
#include "oblab/functionals.hpp"
#include "oblab/solver.hpp"

using namespace oblab;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;
const Point origin{0.0, 0.0, 0.0};

ScalarField field(const std::string& ref, int N = 257, int dim = 2) {
    const auto fx = make_fixture(ref, dim);
    return sample(GridSpec{dim, N}, fx.eval, fx.name);
}

ScalarField im3(int N = 257) {
    return sample(GridSpec{2, N}, [](const Point& x) { return 3 * x[0] * x[0] * x[1] - std::pow(x[1], 3); });
}

}  // namespace

TEST_CASE("frequency of homogeneous harmonic functions is their degree", "[functionals]") {
    for (double lambda : {2.0, 2.5, 3.0, 3.5, 4.0}) {
        std::ostringstream ref;
        ref << "homogeneous:lambda=" << lambda << ",profile=sin";
        const auto v = field(ref.str(), 513);
        for (double r : {0.1, 0.2, 0.4}) CHECK(std::abs(almgren(v, origin, r) - lambda) <= 1e-3);
    }
    const auto p = sample(GridSpec{2, 129}, [](const Point& x) { return 0.3 * x[0] * x[0] + 0.2 * x[1] * x[1]; });
    // Not harmonic, so not 2: for a x^2 + b y^2 the frequency is
    // 4 (a^2 + b^2) / (3 (a^2 + b^2) + 2 a b) at every radius.
    for (double r : {0.1, 0.3, 0.6}) CHECK(almgren(p, origin, r) == Approx(52.0 / 51.0).margin(1e-10));
}

TEST_CASE("Weiss energy on symbolic examples", "[functionals]") {
    const auto h = im3();
    for (double r : {0.1, 0.3, 0.5}) CHECK(std::abs(weiss(h, origin, r, 3.0)) <= 1e-8);
    CHECK(weiss(h, origin, 0.5, 2.0) == Approx(pi * 0.25).epsilon(1e-9));

    const auto q = sample(GridSpec{2, 129}, [](const Point& x) { return 0.5 * x[0] * x[0]; });
    for (double r : {0.2, 0.4, 0.7}) CHECK(weiss(q, origin, r, 2.0) == Approx(-pi / 8).epsilon(1e-10));
}

TEST_CASE("Monneau mass on symbolic examples", "[functionals]") {
    const auto h = im3();
    for (double r : {0.1, 0.3, 0.5}) {
        CHECK(monneau(h, origin, r, 2.0) == Approx(pi * r * r).epsilon(1e-9));
        CHECK(monneau(h, origin, r, 3.0) == Approx(pi).epsilon(1e-9));
        CHECK(monneau(h, origin, r, 3.5) == Approx(pi / r).epsilon(1e-9));
    }
}

TEST_CASE("frequency is invariant under v -> alpha v to machine precision", "[functionals][property]") {
    const auto v = field("cusp:mu=3");
    const Point c{0.03, -0.02, 0.0};
    const double phi = almgren(v, c, 0.25);
    for (double alpha : {-1.0, 1e-6, 3.0, 1e6}) CHECK(almgren(scaled(v, alpha), c, 0.25) == Approx(phi).epsilon(1e-13));
}

TEST_CASE("frequency is invariant under dilation of the argument", "[functionals][property]") {
    // almgren(v(c .), x0 / c, r / c) = almgren(v, x0, r)
    for (const char* ref : {"homogeneous:lambda=3,profile=sin", "perturbed:p=e1,h=im3,eps=0.1"}) {
        const auto fx = make_fixture(ref);
        const Point x0{0.06, 0.02, 0.0};
        const auto v = sample(GridSpec{2, 513}, fx.eval);
        const double base = almgren(v, x0, 0.2);
        for (double c : {0.5, 2.0}) {
            const auto vc = sample(GridSpec{2, 513}, [&](const Point& x) { return fx({c * x[0], c * x[1], 0.0}); });
            CHECK(almgren(vc, {x0[0] / c, x0[1] / c, 0.0}, 0.2 / c) == Approx(base).epsilon(1e-6));
        }
    }
}

TEST_CASE("degenerate boundary mass is an error, not a number", "[functionals]") {
    const auto zero = sample(GridSpec{2, 65}, [](const Point&) { return 0.0; });
    try {
        almgren(zero, origin, 0.3);
        FAIL("expected degenerate_denominator");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::degenerate_denominator);
    }
}

TEST_CASE("profiles: dyadic radii, lambda_* and confidence", "[functionals]") {
    const auto v = field("homogeneous:lambda=3.5,profile=sin", 513);
    const double h = v.h();
    const auto p = profile(v, origin, 8 * h, 0.5, {2.0, 3.5, 4.0});
    REQUIRE(p.radii.size() >= 4);
    for (std::size_t k = 1; k < p.radii.size(); ++k) CHECK(p.radii[k] > p.radii[k - 1]);
    for (double f : p.phi) CHECK(std::isfinite(f));
    CHECK(p.lambda_star == Approx(3.5).margin(1e-3));
    CHECK(p.confidence <= 1e-3);
    CHECK(check_monotone(p, Track::phi).monotone);
    CHECK(check_monotone(p, Track::weiss, 3.5).monotone);
    CHECK(check_monotone(p, Track::monneau, 2.0).monotone);
    CHECK(check_monotone(p, Track::monneau, 3.5).monotone);
    CHECK_FALSE(check_monotone(p, Track::monneau, 4.0).monotone);
    CHECK_THROWS_AS(profile(v, origin, 4 * h, 0.5), Error);

    const auto csv = to_csv(p);
    CHECK(csv.rfind("r,phi,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(p.radii.size()) + 1);
}

TEST_CASE("a decreasing track is caught by the monotonicity check", "[functionals]") {
    FrequencyProfile p;
    p.radii = {0.1, 0.2, 0.4, 0.8};
    p.phi = {3.0, 2.99, 2.5, 2.4};
    const auto v = check_monotone(p, Track::phi);
    CHECK_FALSE(v.monotone);
    CHECK(v.worst_violation == Approx(0.49));
    CHECK(v.location == Approx(0.2));  // left end of the worst drop
    p.phi = {2.0, 2.1, 2.1, 2.3};
    CHECK(check_monotone(p, Track::phi).monotone);
}

TEST_CASE("lambda_* of cusp deficits and a harmonic cubic", "[functionals]") {
    for (auto [mu, expected] : {std::pair{3.0, 2.5}, std::pair{7.0, 4.5}}) {
        const auto w = sample(GridSpec{2, 513}, cusp_deficit(mu));
        const auto p = profile(w, origin, 8 * w.h(), 0.5);
        CHECK(std::abs(p.lambda_star - expected) <= 0.05);
        CHECK(check_monotone(p, Track::phi).monotone);
    }
    const auto h = sample(GridSpec{2, 257}, [](const Point& x) { return 0.01 * (3 * x[0] * x[0] * x[1] - std::pow(x[1], 3)); });
    CHECK(profile(h, origin, 8 * h.h(), 0.5).lambda_star == Approx(3.0).margin(1e-3));
}

TEST_CASE("w Lap w identity on solver output and on a perturbed polynomial", "[functionals]") {
    SolverConfig sc;
    sc.spec = GridSpec{2, 129};
    sc.variant = Variant::classical;
    sc.boundary = make_fixture("radial:R=0.5").eval;
    const auto u = solve(sc).field;
    const auto v = w_laplace_identity(u, named_quadratic("iso", 2), Variant::classical);
    CHECK(v.holds);
    CHECK(v.min_on_coincidence >= -1e-6);
    CHECK(v.coincidence_vertices > 0);

    const auto pert = field("perturbed:p=e1,h=im3,eps=0.01", 129);
    const auto vp = w_laplace_identity(pert, named_quadratic("e1", 2), Variant::no_sign);
    CHECK(vp.max_off <= 1e-8);
}
