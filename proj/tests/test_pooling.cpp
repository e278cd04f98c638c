#include "atlas/error.hpp"
#include "atlas/pooling.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace atlas;

namespace {

QualityTimeSeries series(std::vector<double> v, std::vector<bool> stalled = {}, bool hib = true) {
    QualityTimeSeries ts;
    ts.metric_name = "test";
    ts.higher_is_better = hib;
    if (stalled.empty()) stalled.assign(v.size(), false);
    for (std::size_t k = 0; k < v.size(); ++k)
        if (stalled[k]) v[k] = std::numeric_limits<double>::quiet_NaN();
    ts.values = v;
    ts.stalled = stalled;
    return ts;
}

/// Hysteresis from its definition on a plain vector (quality polarity).
double hysteresis_oracle(const std::vector<double>& q, int w, double alpha) {
    const int n = static_cast<int>(q.size());
    double total = 0;
    for (int t = 0; t < n; ++t) {
        double lo = q[t];
        for (int k = std::max(0, t - w); k <= t; ++k) lo = std::min(lo, q[k]);
        std::vector<double> ahead(q.begin() + t, q.begin() + std::min(n, t + w + 1));
        std::sort(ahead.begin(), ahead.end());
        double num = 0, den = 0;
        for (std::size_t j = 0; j < ahead.size(); ++j) {
            const double weight = static_cast<double>(ahead.size() - j);
            num += weight * ahead[j];
            den += weight;
        }
        total += alpha * lo + (1 - alpha) * num / den;
    }
    return total / n;
}

}  // namespace

TEST_CASE("mean pooling") {
    CHECK(pool_mean(series({1, 2, 3})) == doctest::Approx(2.0));
    CHECK(pool_mean(series({5, 0, 5}, {false, true, false})) == doctest::Approx(5.0));
    CHECK(pool_mean(series({0, 10})) == doctest::Approx(5.0));
    CHECK_THROWS_AS(pool_mean(series({1, 2}, {true, true})), EmptySeriesError);
}

TEST_CASE("hysteresis pooling") {
    PoolingConfig cfg;
    cfg.method = PoolingMethod::hysteresis;
    cfg.hysteresis = {2.0, 0.8};
    CHECK(pool_hysteresis(series({4, 4, 4, 4}), cfg, 5.0) == doctest::Approx(4.0));

    // Hand trace: l = {10,10,2,2,2}, m = {6,6,6,10,10}, q = {9.2,9.2,2.8,3.6,3.6}.
    const std::vector<double> v = {10, 10, 2, 10, 10};
    CHECK(pool_hysteresis(series(v), cfg, 1.0) == doctest::Approx(5.68).epsilon(1e-12));
    CHECK(pool_hysteresis(series(v), cfg, 1.0) == doctest::Approx(hysteresis_oracle(v, 2, 0.8)).epsilon(1e-12));

    cfg.hysteresis.alpha = 1.0;
    const std::vector<double> falling = {9, 7, 7, 4, 2, 1};
    CHECK(pool_hysteresis(series(falling), cfg, 1.0) == doctest::Approx(5.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 100);
    cfg.hysteresis = {1.4, 0.6};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(30);
        for (auto& e : x) e = u(rng);
        const double got = pool_hysteresis(series(x), cfg, 5.0);
        CHECK(got == doctest::Approx(hysteresis_oracle(x, 7, 0.6)).epsilon(1e-12));
        CHECK(got >= *std::min_element(x.begin(), x.end()));
        CHECK(got <= *std::max_element(x.begin(), x.end()));
    }
}

TEST_CASE("hysteresis is order dependent") {
    PoolingConfig cfg;
    const auto a = pool_hysteresis(series({1, 9, 9, 9, 9, 9}), cfg, 1.0);
    const auto b = pool_hysteresis(series({9, 9, 9, 9, 9, 1}), cfg, 1.0);
    CHECK(a != doctest::Approx(b));
}

TEST_CASE("hysteresis skips stalled frames") {
    PoolingConfig cfg;
    const auto with_gap = pool_hysteresis(series({10, 10, 0, 0, 2, 10}, {false, false, true, true, false, false}), cfg, 1.0);
    CHECK(with_gap == doctest::Approx(pool_hysteresis(series({10, 10, 2, 10}), cfg, 1.0)));
}

TEST_CASE("vq pooling") {
    PoolingConfig cfg;
    cfg.method = PoolingMethod::vq;
    CHECK(pool_vq(series({3, 3, 3}), cfg) == doctest::Approx(3.0));
    CHECK(pool_vq(series({7}), cfg) == doctest::Approx(7.0));
    CHECK(pool_vq(series({0, 0, 0, 0, 0, 10, 10, 10, 10, 10}), cfg) == doctest::Approx(2.5));
    // Distortion polarity: the high cluster is the worse one.
    CHECK(pool_vq(series({0, 0, 0, 0, 0, 10, 10, 10, 10, 10}, {}, false), cfg) == doctest::Approx(7.5));

    std::mt19937_64 rng(4);
    std::normal_distribution<double> lo(20, 2), hi(80, 2);
    std::vector<double> bimodal;
    for (int k = 0; k < 20; ++k) bimodal.push_back(k % 3 ? hi(rng) : lo(rng));
    const auto ts = series(bimodal);
    CHECK(pool_vq(ts, cfg) <= pool_mean(ts));
    CHECK(pool_vq(ts, cfg) >= *std::min_element(bimodal.begin(), bimodal.end()));
    cfg.vq.seed = 99;
    const double first = pool_vq(ts, cfg);
    CHECK(pool_vq(ts, cfg) == first);
}

TEST_CASE("two means finds the obvious split") {
    const std::vector<double> v = {1, 1.2, 0.9, 9, 9.5, 10};
    const auto tm = two_means_1d(v, 5, 1);
    CHECK(tm.low_centre == doctest::Approx((1 + 1.2 + 0.9) / 3));
    CHECK(tm.high_centre == doctest::Approx((9 + 9.5 + 10) / 3));
    CHECK(tm.is_high == std::vector<bool>{false, false, false, true, true, true});
}

TEST_CASE("pooling config validation") {
    PoolingConfig cfg;
    cfg.hysteresis.tau_s = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = {};
    cfg.vq.w_low = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    CHECK(parse_pooling("vq") == PoolingMethod::vq);
    CHECK_THROWS(parse_pooling("median"));
}
