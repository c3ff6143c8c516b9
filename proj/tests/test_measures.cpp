#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oblab/fixtures.hpp"
#include "oblab/measures.hpp"

using namespace oblab;
using Catch::Approx;

TEST_CASE("negative density of simple sign patterns", "[measures]") {
    const GridSpec g{2, 257};
    const auto pos = sample(g, [](const Point& x) { return x[0] * x[0] + 0.1; });
    CHECK(negative_density(pos, {0, 0, 0}, 0.3) == 0.0);

    const auto half = sample(g, [](const Point& x) { return x[0]; });
    for (double rho : {0.1, 0.3, 0.5}) CHECK(std::abs(negative_density(half, {0, 0, 0}, rho) - 0.5) <= 2 * g.spacing() / rho);
}

TEST_CASE("cusp negativity shrinks toward the cusp point", "[measures]") {
    const auto fx = make_fixture("cusp:mu=3");
    const auto u = sample(GridSpec{2, 513}, fx.eval);
    double previous = 1.0;
    for (double rho : {0.4, 0.2, 0.1, 0.05}) {
        const double d = negative_density(u, {0, 0, 0}, rho);
        CHECK(d < previous);
        previous = d;
    }
}

TEST_CASE("max radius of negativity: whole ball, half plane, none", "[measures]") {
    const GridSpec g{2, 257};
    const double h = g.spacing();
    const auto minus = sample(g, [](const Point&) { return -1.0; });
    CHECK(std::abs(max_radius_negative(minus, {0, 0, 0}, 0.5) - 0.5) <= h);

    const auto half = sample(g, [](const Point& x) { return x[0]; });
    CHECK(std::abs(max_radius_negative(half, {0, 0, 0}, 0.5) - 0.25) <= h);

    const auto pos = sample(g, [](const Point&) { return 1.0; });
    CHECK(max_radius_negative(pos, {0, 0, 0}, 0.5) == 0.0);
}

TEST_CASE("density and MR are monotone under pointwise decrease", "[measures][property]") {
    const GridSpec g{2, 129};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = U(rng), b = U(rng), c = 0.3 * U(rng), shift = 0.2 * std::abs(U(rng)) + 0.01;
        auto f = [&](const Point& x) { return a * x[0] + b * x[1] * x[1] + c + std::sin(3 * x[0] * x[1]); };
        const auto v2 = sample(g, f);
        const auto v1 = sample(g, [&](const Point& x) { return f(x) - shift; });
        const Point y{0.1 * U(rng), 0.1 * U(rng), 0.0};
        CHECK(negative_density(v1, y, 0.3) >= negative_density(v2, y, 0.3));
        const double r1 = max_radius_negative(v1, y, 0.3), r2 = max_radius_negative(v2, y, 0.3);
        CHECK(r1 >= r2);
        CHECK(r1 <= 0.3);
    }
}

TEST_CASE("coincidence masks follow the variant", "[measures]") {
    const GridSpec g{2, 129};
    const auto fx = make_fixture("radial:R=0.5");
    const auto u = sample(g, fx.eval);
    const auto lam = coincidence_mask(u, Variant::classical);
    std::size_t inside = 0, wrong = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = norm(g.vertex(i), 2);
        if (r < 0.5 - 2 * g.spacing() && !lam[i]) ++wrong;
        if (r > 0.5 + 2 * g.spacing() && lam[i]) ++wrong;
        inside += lam[i];
    }
    CHECK(wrong == 0);
    CHECK(inside > 0);
    CHECK_FALSE(free_boundary_vertices(u, Variant::classical).empty());
    CHECK(parse_variant("superconductivity") == Variant::superconductivity);
    CHECK_THROWS_AS(parse_variant("thin"), Error);
}

TEST_CASE("class P on a classical solution, a cusp and a half space", "[measures]") {
    const GridSpec g{2, 257};
    const auto classical = sample(g, make_fixture("radial:R=0.5").eval);
    const auto rc = check_class_P(classical, {0.5, 0, 0}, 0.25, 10.0, Modulus::parse("zero"));
    CHECK(rc.member);
    for (const auto& row : rc.profile) CHECK(row.ratio == 0.0);

    const auto cusp = sample(GridSpec{2, 513}, make_fixture("cusp:mu=3").eval);
    const auto cc = check_class_P(cusp, {0, 0, 0}, 0.25, 10.0, Modulus::parse("const:1"),
                                  std::vector<Point>{{0, 0, 0}});
    REQUIRE(cc.profile.size() >= 3);
    CHECK(cc.profile.front().ratio < cc.profile.back().ratio);

    const auto plane = sample(g, [](const Point& x) { return x[0]; });
    const auto rp = check_class_P(plane, {0, 0, 0}, 0.25, 10.0, Modulus::parse("power:C=1,a=1"),
                                  std::vector<Point>{{0, 0, 0}});
    CHECK_FALSE(rp.member);
    for (const auto& row : rp.profile) CHECK(row.ratio == Approx(0.5).margin(2 * g.spacing() / row.r + 1e-12));
}

TEST_CASE("moduli parse and evaluate", "[measures]") {
    CHECK(Modulus::parse("zero")(0.1) == 0.0);
    CHECK(Modulus::parse("const:0.3")(0.1) == 0.3);
    CHECK(Modulus::parse("power:C=2,a=0.5")(0.25) == Approx(1.0));
    CHECK(Modulus::parse("log:C=1,b=1")(std::exp(-2.0)) == Approx(0.5));
    CHECK_THROWS_AS(Modulus::parse("wiggle:1"), Error);
}
