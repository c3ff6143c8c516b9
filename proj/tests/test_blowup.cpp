#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "oblab/blowup.hpp"
#include "oblab/fixtures.hpp"

using namespace oblab;
using Catch::Approx;

namespace {

const Point origin{0.0, 0.0, 0.0};

ScalarField field(const std::string& ref, int N, int dim = 2) {
    const auto fx = make_fixture(ref, dim);
    return sample(GridSpec{dim, N}, fx.eval, fx.name);
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.spec().size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("rescaling a quadratic returns the quadratic", "[blowup]") {
    auto p = [](const Point& x) { return 0.3 * x[0] * x[0] + 0.2 * x[1] * x[1] - 0.05 * x[0] * x[1]; };
    const auto u = sample(GridSpec{2, 129}, p);
    const auto r = rescale(u, origin, 0.25);
    CHECK(max_abs_diff(r, u) <= 1e-13);
}

TEST_CASE("rescaling p + eps h shrinks the cubic correction linearly", "[blowup]") {
    const auto fx = make_fixture("perturbed:p=e1,h=im3,eps=0.01");
    const auto u = sample(GridSpec{2, 129}, fx.eval);
    for (double r : {0.5, 0.25}) {
        const auto ur = rescale(u, origin, r);
        const auto expected = sample(u.spec(), [&](const Point& x) {
            return 0.5 * x[0] * x[0] + 0.01 * r * (3 * x[0] * x[0] * x[1] - std::pow(x[1], 3));
        });
        CHECK(max_abs_diff(ur, expected) <= 1e-13);
    }
}

TEST_CASE("rescaling is a semigroup", "[blowup][property]") {
    for (const char* ref : {"perturbed:p=e1,h=im3,eps=0.01", "perturbed:p=iso,h=re3,eps=0.05"}) {
        const auto u = field(ref, 257);
        const Point x0{0.1, -0.05, 0.0};
        for (auto [r, s] : {std::pair{0.5, 0.5}, std::pair{0.4, 0.25}}) {
            const auto twice = rescale(rescale(u, x0, r), origin, s);
            const auto once = rescale(u, x0, r * s);
            CHECK(max_abs_diff(twice, once) <= 1e-6 * once.scale());
        }
    }
    const auto u = field("perturbed:p=e1,h=im3,eps=0.01", 129);
    CHECK_THROWS_AS(rescale(u, {0.6, 0.0, 0.0}, 0.5), Error);
    CHECK_THROWS_AS(rescale(u, origin, 4 * u.h()), Error);
}

TEST_CASE("blowup fits of known singular points", "[blowup]") {
    const auto pert = field("perturbed:p=e1,h=im3,eps=0.01", 257);
    const auto f = fit_blowup(pert, origin, default_radii(pert, origin));
    REQUIRE(f.accepted);
    CHECK(f.blowup.p.A(0, 0) == Approx(1.0).margin(1e-6));
    CHECK(f.blowup.p.A(1, 1) == Approx(0.0).margin(1e-6));
    CHECK(f.blowup.p.A(0, 1) == Approx(0.0).margin(1e-6));
    CHECK(f.blowup.m == 1);
    CHECK(f.blowup.p.A == f.blowup.p.A.transpose());
    CHECK(f.blowup.p.A.trace() == Approx(1.0).margin(1e-3));

    const auto cusp = field("cusp:mu=3", 1025);
    const auto fc = fit_blowup(cusp, origin, default_radii(cusp, origin));
    REQUIRE(fc.accepted);
    CHECK(fc.blowup.p.A(0, 0) == Approx(0.0).margin(1e-2));
    CHECK(fc.blowup.p.A(1, 1) == Approx(1.0).margin(1e-2));
    CHECK(fc.blowup.m == 1);
}

TEST_CASE("a regular free boundary point is not singular", "[blowup]") {
    const auto u = field("radial:R=0.5", 257);
    const Point x0{0.5, 0.0, 0.0};
    const auto f = fit_blowup(u, x0, default_radii(u, x0));
    CHECK_FALSE(f.accepted);
    CHECK_FALSE(f.reason.empty());
    try {
        classify(u, x0);
        FAIL("expected a classification error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::classification);
    }
}

TEST_CASE("classification of cusp and perturbed fixtures", "[blowup]") {
    const auto c3 = classify(field("cusp:mu=3", 1025), origin);
    CHECK(c3.m == 1);
    CHECK(c3.sigma_plus);
    CHECK(c3.lambda_star == Approx(2.5).margin(0.05));
    CHECK(c3.label == StratumLabel::generic);

    const auto c7 = classify(field("cusp:mu=7", 1025), origin);
    CHECK(c7.m == 1);
    CHECK(c7.lambda_star == Approx(4.5).margin(0.05));
    CHECK(c7.label == StratumLabel::generic);

    const auto iso = classify(field("perturbed:p=iso,h=re4,eps=0.001", 513), origin);
    CHECK(iso.m == 0);
    CHECK(iso.isolated);
    CHECK(iso.lambda_star == Approx(4.0).margin(1e-3));
    CHECK(iso.label == StratumLabel::generic);

    const auto e1 = classify(field("perturbed:p=e1,h=im3,eps=0.01", 513), origin);
    CHECK(e1.m == 1);
    CHECK(e1.lambda_star == Approx(3.0).margin(1e-3));
    CHECK(e1.sigma_plus);
    CHECK_FALSE(e1.sigma_plus_ambiguous);
}

TEST_CASE("label thresholds follow the stratum", "[blowup]") {
    CHECK(generic_threshold(2, 1) == 2.5);
    CHECK(generic_threshold(3, 2) == 2.5);
    CHECK(generic_threshold(3, 1) == 3.0);
    CHECK(generic_threshold(3, 0) == 3.0);
}

TEST_CASE("classify is equivariant under rotations", "[blowup][property]") {
    const auto fx = make_fixture("perturbed:p=e1,h=im3,eps=0.01");
    const auto base = classify(sample(GridSpec{2, 257}, fx.eval), origin);
    for (double a : {0.3, 1.1, 2.0}) {
        Eigen::Matrix2d R;
        R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        const auto turned = sample(GridSpec{2, 257}, [&](const Point& x) {
            return fx({R(0, 0) * x[0] + R(1, 0) * x[1], R(0, 1) * x[0] + R(1, 1) * x[1], 0.0});
        });
        const auto sp = classify(turned, origin);
        CHECK(sp.m == base.m);
        CHECK(sp.label == base.label);
        CHECK(sp.sigma_plus == base.sigma_plus);
        const Eigen::MatrixXd expected = R * base.blowup.p.A * R.transpose();
        CHECK((sp.blowup.p.A - expected).cwiseAbs().maxCoeff() <= 1e-3);
    }
}

TEST_CASE("Almgren blowup of a perturbed cubic is the normalized cubic", "[blowup]") {
    const auto u = field("perturbed:p=e1,h=im3,eps=0.01", 257);
    const auto p = BlowupPolynomial::from(named_quadratic("e1", 2));
    const auto radii = default_radii(u, origin);
    const auto q = almgren_blowup(u, p, origin, {radii.front(), radii.back()}, 3.0);
    REQUIRE(q.polynomial);
    CHECK(q.residual < 1e-3);
    CHECK(q.harmonic_polynomial);
    // ||h||^2 on the unit circle is pi, so the normalized blowup is h / sqrt(pi).
    const double c = 1.0 / std::sqrt(std::numbers::pi);
    for (double t : {0.1, 1.0, 2.5}) {
        const Point x{std::cos(t), std::sin(t), 0.0};
        CHECK(std::abs(q(x)) == Approx(c * std::abs(std::sin(3 * t))).margin(1e-6));
    }
}

TEST_CASE("Almgren blowup of the mu = 3 cusp is a slit five-halves profile", "[blowup]") {
    const auto u = field("cusp:mu=3", 1025);
    const auto p = BlowupPolynomial::from(*make_fixture("cusp:mu=3").truth.blowup);
    const auto radii = default_radii(u, origin);
    const auto q = almgren_blowup(u, p, origin, {radii.front(), radii.back()}, 2.5);
    CHECK_FALSE(q.polynomial);
    CHECK(q.lambda == 2.5);
    CHECK(std::abs(q.amplitude) == Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-3));
    CHECK(q.residual < 1e-2);
    CHECK_THROWS_AS(almgren_blowup(u, p, origin, {radii.front(), radii.back()}, 2.8), Error);
}

TEST_CASE("structure of a lambda = 2 deficit round-trips", "[blowup]") {
    const auto fx = make_fixture("structured:m=1,t=1,eps=0.01,seed=11", 3);
    const auto u = sample(GridSpec{3, 65}, fx.eval);
    const auto p = BlowupPolynomial::from(*fx.truth.blowup);
    const auto radii = default_radii(u, origin);
    const auto q = almgren_blowup(u, p, origin, {radii.front(), radii.back()}, 2.0);
    REQUIRE(q.structure);
    CHECK(q.structure->t > 0.0);
    CHECK(q.structure->trace_gap <= 1e-3);
    CHECK(q.structure->off_kernel_deviation <= 1e-3);

    // The deficit is eps Q with Q = t on the complement; q = Q / ||Q||.
    const auto& Q = *fx.truth.quadratic_deficit;
    const Eigen::MatrixXd Ahat = hessian_of_quadratic(q.q) * 0.5;
    const double ratio = Ahat.norm() / Q.A.norm();
    CHECK((Ahat - ratio * Q.A).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("sign of the sampled integral over P+", "[blowup]") {
    const auto fx = make_fixture("structured:m=1,t=1,eps=0.01,seed=11", 3);
    const auto u = sample(GridSpec{3, 65}, fx.eval);
    const auto p = BlowupPolynomial::from(*fx.truth.blowup);
    const auto radii = default_radii(u, origin);
    const auto q = almgren_blowup(u, p, origin, {radii.front(), radii.back()}, 2.0);
    CHECK(monneau_integral(q.q, p.p, p.p) == Approx(0.0).margin(1e-14));
    const auto a = monneau_inequality(q.q, p.p, 2000, 42, true);
    CHECK(a.minimum >= -1e-6);
    const auto b = monneau_inequality(q.q * -1.0, p.p, 2000, 42, false);
    CHECK(b.minimum < 0.0);
    const auto c = monneau_inequality(q.q, p.p, 2000, 42, false);
    const auto d = monneau_inequality(q.q, p.p, 2000, 42, false);
    CHECK(c.minimum == d.minimum);

    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
        const auto s = sample_p_plus(3, rng);
        CHECK(s.in_p_plus(1e-12));
    }
}

TEST_CASE("Holder exponents of synthetic blowup maps", "[blowup]") {
    std::vector<Point> x;
    for (int k = 0; k < 20; ++k) x.push_back({0.02 * k, 0.0, 0.0});
    Eigen::MatrixXd A0(2, 2), B(2, 2);
    A0 << 1, 0, 0, 0;
    B << 0.1, 0.05, 0.05, -0.1;

    std::vector<Eigen::MatrixXd> same(x.size(), A0);
    const auto constant = holder_exponent(x, same, 2);
    CHECK(constant.constant_map);
    CHECK(constant.C == Approx(0.0).margin(1e-14));

    std::vector<Eigen::MatrixXd> root, lip;
    for (const auto& p : x) {
        root.push_back(A0 + std::sqrt(p[0]) * B);
        lip.push_back(A0 + p[0] * B);
    }
    CHECK(holder_exponent(x, root, 2).beta == Approx(0.5).margin(0.1));
    CHECK(holder_exponent(x, lip, 2).beta == Approx(1.0).margin(0.1));
    CHECK_THROWS_AS(holder_exponent({x[0], x[1]}, {A0, A0}, 2), Error);
}

TEST_CASE("singular points serialize to one JSON object per line", "[blowup]") {
    const auto sp = classify(field("perturbed:p=e1,h=im3,eps=0.01", 257), origin);
    const auto text = to_jsonl({sp, sp});
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    const auto j = nlohmann::json::parse(text.substr(0, text.find('\n')));
    CHECK(j["m"] == 1);
    CHECK(j["lambda_star"].get<double>() == Approx(3.0).margin(1e-3));
}
