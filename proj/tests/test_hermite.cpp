#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "additive/hermite.hpp"
#include "oracles.hpp"

using namespace additive;

TEST_CASE("he_eval matches hand-written polynomials") {
    CHECK(he_eval(0, 3.7) == 1.0);
    CHECK(he_eval(2, 1.0) == 0.0);
    CHECK(he_eval(3, 2.0) == 2.0);  // x^3 - 3x at x = 2
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> xs(-4.0, 4.0);
    for (int k = 0; k <= 6; ++k) {
        for (int rep = 0; rep < 20; ++rep) {
            const double x = xs(eng);
            CHECK(he_eval(k, x) == doctest::Approx(oracles::he_by_hand(k, x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("series_eval") {
    CHECK(series_eval(HermiteSeries({0.0, 1.0}), 5.0) == 5.0);
    CHECK(series_eval(HermiteSeries({1.0, 0.0, 1.0}), 2.0) == 4.0);
    const HermiteSeries he3_unit = HermiteSeries::basis(3).scaled(1.0 / std::sqrt(6.0));
    CHECK(series_eval(he3_unit, 2.0) == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));
}

TEST_CASE("inner_product in coefficient space") {
    CHECK(inner_product(HermiteSeries::basis(2), HermiteSeries::basis(2)) == 2.0);
    CHECK(inner_product(HermiteSeries::basis(2), HermiteSeries::basis(3)) == 0.0);
    const HermiteSeries f({0.0, 2.0, 1.0});
    const HermiteSeries g({0.0, 1.0, 3.0});
    CHECK(inner_product(f, g) == 8.0);

    // Monte Carlo cross-check of the coefficient formula.
    auto fg = [&](double z) { return series_eval(f, z) * series_eval(g, z); };
    const auto mc = oracles::mc_gaussian_expectation(fg, 1000000, 21);
    CHECK(std::abs(mc.mean - 8.0) < 3.0 * mc.std_error);
}

TEST_CASE("gauss_quadrature small orders and exactness") {
    const auto r1 = gauss_quadrature(1);
    REQUIRE(r1.nodes.size() == 1);
    CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r1.weights[0] == doctest::Approx(1.0).epsilon(1e-14));

    const auto r2 = gauss_quadrature(2);
    REQUIRE(r2.nodes.size() == 2);
    CHECK(r2.nodes[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r2.nodes[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r2.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r2.weights[1] == doctest::Approx(0.5).epsilon(1e-12));

    const auto r20 = gauss_quadrature(20);
    const double he6sq = r20.integrate([](double x) {
        const double v = he_eval(6, x);
        return v * v;
    });
    CHECK(std::abs(he6sq - 720.0) < 1e-9);  // 6!

    double wsum = 0.0;
    for (double w : r20.weights) wsum += w;
    CHECK(std::abs(wsum - 1.0) < 1e-12);
    CHECK(gauss_quadrature(64).integrate([](double) { return 1.0; }) ==
          doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(gauss_quadrature(0));
    CHECK_THROWS(gauss_quadrature(257));
}

TEST_CASE("orthogonality table k,l <= 10 at order 24") {
    const auto rule = gauss_quadrature(24);
    for (int k = 0; k <= 10; ++k) {
        for (int l = 0; l <= 10; ++l) {
            const double got = rule.integrate([&](double x) { return he_eval(k, x) * he_eval(l, x); });
            const double want = (k == l) ? oracles::factorial(k) : 0.0;
            CHECK(std::abs(got - want) < 1e-8);
        }
    }
}

TEST_CASE("derivative identity He_k' = k He_{k-1}") {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> xs(-4.0, 4.0);
    const double h = 1e-5;
    for (int rep = 0; rep < 100; ++rep) {
        const double x = xs(eng);
        for (int k = 1; k <= 8; ++k) {
            const double fd = (he_eval(k, x + h) - he_eval(k, x - h)) / (2.0 * h);
            CHECK(std::abs(fd - k * he_eval(k - 1, x)) < 1e-4);
        }
    }
}

TEST_CASE("expand_function basics") {
    const auto rule = gauss_quadrature(24);
    const auto sq = expand_function([](double x) { return x * x; }, 4, rule);
    CHECK(sq.coeff(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(sq.coeff(1)) < 1e-12);
    CHECK(sq.coeff(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(sq.coeff(3)) < 1e-12);
    CHECK(std::abs(sq.coeff(4)) < 1e-12);

    const auto self = expand_function([](double x) { return he_eval(3, x); }, 5, rule);
    for (int k = 0; k <= 5; ++k) {
        const double want = (k == 3) ? 1.0 : 0.0;
        CHECK(std::abs(self.coeff(k) - want) < 1e-10);
    }

    // ReLU needs a kink-aware rule; the Gauss rule is only used for the
    // low-degree sanity values here.
    const auto relu = expand_function([](double x) { return std::max(x, 0.0); }, 2,
                                      piecewise_legendre_rule({0.0}));
    CHECK(relu.coeff(1) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(relu.coeff(2) == doctest::Approx(0.5 / std::sqrt(2.0 * M_PI)).epsilon(1e-10));

    CHECK_THROWS(expand_function([](double x) { return x; }, 30, gauss_quadrature(16)));
}

TEST_CASE("round trip: expand(series_eval(s)) recovers s") {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> cs(-2.0, 2.0);
    std::uniform_int_distribution<int> degs(0, 8);
    const auto rule = gauss_quadrature(32);
    for (int rep = 0; rep < 40; ++rep) {
        const int q = degs(eng);
        std::vector<double> c(static_cast<size_t>(q) + 1);
        for (double& v : c) v = cs(eng);
        if (c.back() == 0.0) c.back() = 1.0;
        const HermiteSeries s(c);
        const auto back = expand_function([&](double x) { return series_eval(s, x); }, q, rule);
        for (int k = 0; k <= q; ++k) CHECK(std::abs(back.coeff(k) - s.coeff(k)) < 1e-9);
    }
}

TEST_CASE("inner_product(s,s) equals second_moment exactly") {
    std::mt19937_64 eng(13);
    std::uniform_real_distribution<double> cs(-3.0, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> c(1 + rep % 9);
        for (double& v : c) v = cs(eng);
        const HermiteSeries s(c);
        CHECK(inner_product(s, s) == s.second_moment());
    }
}

TEST_CASE("relu_shifted_coeffs closed forms") {
    const auto at0 = relu_shifted_coeffs(0.0, 4);
    // Unnormalized inner products E[ReLU(z) He_i(z)] = c_i * i!.
    CHECK(at0.coeff(2) * 2.0 == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
    CHECK(at0.coeff(3) == 0.0);
    const auto atm1 = relu_shifted_coeffs(-1.0, 4);
    CHECK(atm1.coeff(2) * 2.0 ==
          doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * M_PI)).epsilon(1e-12));

    // Against the kink-split quadrature route, b in {-2..2}, degrees 1..6.
    for (int bi = -2; bi <= 2; ++bi) {
        const double b = bi;
        const auto closed = relu_shifted_coeffs(b, 6);
        const auto rule = piecewise_legendre_rule({-b});
        const auto quad = expand_function([b](double z) { return std::max(z + b, 0.0); }, 6, rule);
        for (int i = 1; i <= 6; ++i) CHECK(std::abs(closed.coeff(i) - quad.coeff(i)) < 1e-8);
        CHECK(std::abs(closed.coeff(0) - quad.coeff(0)) < 1e-10);
    }
}

TEST_CASE("information_exponent") {
    CHECK(information_exponent(HermiteSeries::basis(3)) == 3);
    CHECK(information_exponent(HermiteSeries({5.0, 0.0, 0.2, 0.9})) == 2);
    CHECK_THROWS(information_exponent(HermiteSeries({7.0, 0.0, 0.0, 0.0})));
    // Strict > tol comparison.
    CHECK(information_exponent(HermiteSeries({0.0, 1e-9, 1.0}), 1e-9) == 2);
}

TEST_CASE("superorthogonality_check") {
    SUBCASE("Hermite basis elements are K=1 superorthogonal below their degree") {
        const auto rule = gauss_quadrature(16);
        const auto r = superorthogonality_check(HermiteSeries::basis(4), 1, 3, rule);
        for (int l = 0; l < 3; ++l) CHECK(std::abs(r(0, l)) < 1e-10);
    }
    SUBCASE("He_1 squared has a He_2 component") {
        const auto r = superorthogonality_check(HermiteSeries::basis(1), 2, 2, gauss_quadrature(8));
        CHECK(r(1, 1) == doctest::Approx(2.0).epsilon(1e-10));  // He_1^2 = He_2 + He_0
        CHECK(std::abs(r(0, 0) - 1.0) < 1e-10);                 // E[He_1 He_1] = 1
    }
    SUBCASE("insufficient order is rejected") {
        CHECK_THROWS(superorthogonality_check(HermiteSeries::basis(8), 3, 4, gauss_quadrature(8)));
    }
}

TEST_CASE("normalized basis rescale round trip") {
    const HermiteSeries s({0.3, -1.2, 0.0, 2.5});
    const auto n = s.to_normalized();
    const auto back = HermiteSeries::from_normalized(n);
    for (int k = 0; k <= 3; ++k) CHECK(back.coeff(k) == doctest::Approx(s.coeff(k)).epsilon(1e-14));
    CHECK(n[3] == doctest::Approx(2.5 * std::sqrt(6.0)).epsilon(1e-14));
}

TEST_CASE("series product and shift") {
    // He_1 * He_1 = He_2 + He_0
    const auto sq = series_product(HermiteSeries::basis(1), HermiteSeries::basis(1));
    CHECK(sq.coeff(0) == 1.0);
    CHECK(sq.coeff(2) == 1.0);

    // shift: values must agree pointwise with evaluating at z + b
    const HermiteSeries s({0.5, -1.0, 0.25, 1.5});
    const auto shifted = series_shift(s, 0.7);
    for (double z : {-2.0, -0.3, 0.0, 1.1, 2.4})
        CHECK(series_eval(shifted, z) == doctest::Approx(series_eval(s, z + 0.7)).epsilon(1e-12));

    // product agrees with pointwise multiplication in expectation
    const HermiteSeries f({0.0, 1.0, 0.5});
    const HermiteSeries g({1.0, 0.0, -0.5, 0.2});
    const auto prod = series_product(f, g);
    const auto rule = gauss_quadrature(16);
    const double direct = rule.integrate([&](double x) { return series_eval(f, x) * series_eval(g, x); });
    CHECK(prod.coeff(0) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("series JSON round trip") {
    const HermiteSeries s({0.0, 1.5, 0.0, -0.125});
    const auto back = HermiteSeries::from_json(s.to_json());
    REQUIRE(back.degree() == s.degree());
    for (int k = 0; k <= s.degree(); ++k) CHECK(back.coeff(k) == s.coeff(k));
}
