#include "atlas/error.hpp"
#include "atlas/random.hpp"
#include "atlas/stats.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace atlas;

TEST_CASE("average ranks and srocc") {
    const std::vector<double> v = {3, 1, 2, 2, 5};
    CHECK(average_ranks(v) == std::vector<double>{4, 1, 2.5, 2.5, 5});

    const std::vector<double> a = {1, 2, 2, 3}, b = {1, 2, 3, 4};
    CHECK(*srocc(a, b) == doctest::Approx(0.9487).epsilon(1e-4));

    std::vector<double> x = {0.1, 0.5, 0.2, 0.9, 0.7};
    std::vector<double> y, r;
    for (double t : x) y.push_back(std::exp(5 * t));
    for (double t : x) r.push_back(-t * t * t);
    CHECK(*srocc(x, y) == doctest::Approx(1.0));
    CHECK(*srocc(x, r) == doctest::Approx(-1.0));

    CHECK_FALSE(srocc(x, std::vector<double>(5, 1.0)).has_value());
    CHECK_THROWS(srocc(std::vector<double>{1, 2}, std::vector<double>{1, 2}));
    CHECK_THROWS_AS(srocc(x, std::vector<double>{1, 2, 3}), SizeMismatchError);
}

TEST_CASE("srocc matches a brute-force rank oracle with heavy ties") {
    Rng rng(5);
    std::vector<double> a(1000), b(1000);
    for (int k = 0; k < 1000; ++k) {
        a[k] = static_cast<double>(uniform_int(rng, 0, 20));
        b[k] = a[k] + static_cast<double>(uniform_int(rng, -8, 8));
    }
    CHECK(std::abs(*srocc(a, b) - oracle::spearman(a, b)) < 1e-12);
    CHECK(std::abs(*pearson(a, b) - oracle::pearson(a, b)) < 1e-12);
}

TEST_CASE("logistic lcc") {
    Rng rng(6);
    std::vector<double> pred(40), mos(40);
    for (int k = 0; k < 40; ++k) pred[k] = uniform(rng, -3, 3);

    SUBCASE("identical vectors") {
        CHECK(*lcc_after_logistic(pred, pred) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("logistic warp is undone") {
        const Logistic4 f{80, 10, 0.5, 0.7};
        for (int k = 0; k < 40; ++k) mos[k] = f(pred[k]);
        CHECK(*lcc_after_logistic(pred, mos) >= 0.999);
    }
    SUBCASE("never worse than the linear fit") {
        for (int k = 0; k < 40; ++k) mos[k] = pred[k] + uniform(rng, -2, 2);
        CHECK(*lcc_after_logistic(pred, mos) >= std::abs(*pearson(pred, mos)) - 1e-6);
        for (int k = 0; k < 40; ++k) mos[k] = -mos[k];
        CHECK(*lcc_after_logistic(pred, mos) >= std::abs(*pearson(pred, mos)) - 1e-6);
    }
    SUBCASE("preconditions") {
        CHECK_FALSE(lcc_after_logistic(std::vector<double>(6, 2.0), std::vector<double>{1, 2, 3, 4, 5, 6}).has_value());
        CHECK_THROWS(lcc_after_logistic(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}));
    }
    SUBCASE("deterministic for a seed") {
        for (int k = 0; k < 40; ++k) mos[k] = std::tanh(pred[k]) + uniform(rng, -0.3, 0.3);
        LogisticOptions opts;
        opts.seed = 9;
        CHECK(*lcc_after_logistic(pred, mos, opts) == *lcc_after_logistic(pred, mos, opts));
    }
}

TEST_CASE("ranksum") {
    SUBCASE("normal approximation tracks the exact distribution") {
        Rng rng(7);
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> a(14), b(15);
            for (auto& v : a) v = uniform01(rng) + 0.2 * rep;
            for (auto& v : b) v = uniform01(rng);
            const auto res = ranksum(a, b);
            CHECK(res.u == oracle::mann_whitney_u(a, b));
            CHECK(std::abs(res.p - oracle::exact_u_pvalue(14, 15, res.u)) < 0.02);
        }
    }
    SUBCASE("separated samples") {
        std::vector<double> lo, hi;
        for (int k = 1; k <= 20; ++k) {
            lo.push_back(k);
            hi.push_back(100 + k);
        }
        const auto res = ranksum(hi, lo);
        CHECK(res.u == 400.0);
        CHECK(res.z > 0);
        CHECK(res.p < 1e-6);
        const auto back = ranksum(lo, hi);
        CHECK(back.u == 0.0);
        CHECK(back.p == doctest::Approx(res.p));
    }
    SUBCASE("identical constant samples") {
        const std::vector<double> c(12, 0.5);
        const auto res = ranksum(c, c);
        CHECK(res.p == 1.0);
        CHECK(res.u == 72.0);
    }
}

TEST_CASE("finite median") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(*finite_median(std::vector<double>{3, nan, 1, 2}) == 2.0);
    CHECK(*finite_median(std::vector<double>{4, 1, 3, 2}) == 2.5);
    CHECK_FALSE(finite_median(std::vector<double>{nan, nan}).has_value());
}

TEST_CASE("nelder-mead") {
    auto rosen = [](const std::array<double, 2>& x) {
        return 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1 - x[0]) * (1 - x[0]);
    };
    const auto res = nelder_mead(rosen, std::array<double, 2>{-1.2, 1.0}, std::array<double, 2>{0.5, 0.5}, 5000);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}
