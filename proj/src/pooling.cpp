#include "atlas/pooling.hpp"

#include "atlas/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atlas {

std::string_view pooling_name(PoolingMethod m) {
    switch (m) {
        case PoolingMethod::mean: return "mean";
        case PoolingMethod::hysteresis: return "hysteresis";
        case PoolingMethod::vq: return "vq";
    }
    return "unknown";
}

PoolingMethod parse_pooling(std::string_view name) {
    if (name == "mean") return PoolingMethod::mean;
    if (name == "hysteresis") return PoolingMethod::hysteresis;
    if (name == "vq") return PoolingMethod::vq;
    throw InvalidArgumentError("unknown pooling method '" + std::string(name) + "'");
}

void PoolingConfig::validate() const {
    if (!(hysteresis.tau_s > 0.0)) throw InvalidArgumentError("hysteresis tau must be positive");
    if (!(hysteresis.alpha >= 0.0 && hysteresis.alpha <= 1.0))
        throw InvalidArgumentError("hysteresis alpha must be in [0, 1]");
    if (!(vq.w_low >= 0.0 && vq.w_low <= 1.0)) throw InvalidArgumentError("VQ weight must be in [0, 1]");
    if (vq.kmeans_restarts < 1) throw InvalidArgumentError("VQ needs at least one k-means restart");
}

namespace {

std::vector<double> playing_or_throw(const QualityTimeSeries& ts) {
    ts.validate();
    auto values = ts.playing_values();
    if (values.empty()) throw EmptySeriesError("series '" + ts.metric_name + "' has no playing frames");
    return values;
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double pool_mean(const QualityTimeSeries& ts) {
    const auto values = playing_or_throw(ts);
    return mean_of(values);
}

double pool_hysteresis(const QualityTimeSeries& ts, const PoolingConfig& cfg, double fps) {
    cfg.validate();
    if (!(fps > 0.0)) throw InvalidArgumentError("fps must be positive");
    const auto q = playing_or_throw(ts);
    const auto n = q.size();
    const auto window = static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.hysteresis.tau_s * fps)));
    const double alpha = cfg.hysteresis.alpha;
    // Per-frame terms are oriented so that the memory term tracks the worst
    // recent quality regardless of metric polarity.
    const double sign = ts.higher_is_better ? 1.0 : -1.0;

    double total = 0.0;
    std::vector<double> ahead;
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t past_begin = t >= window ? t - window : 0;
        double memory = sign * q[t];
        for (std::size_t k = past_begin; k <= t; ++k) memory = std::min(memory, sign * q[k]);

        const std::size_t ahead_end = std::min(n, t + window + 1);
        ahead.clear();
        for (std::size_t k = t; k < ahead_end; ++k) ahead.push_back(sign * q[k]);
        std::sort(ahead.begin(), ahead.end());
        const auto m = ahead.size();
        double current = 0.0;
        double weight_sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double w = static_cast<double>(m - k);
            current += w * ahead[k];
            weight_sum += w;
        }
        current /= weight_sum;
        total += sign * (alpha * memory + (1.0 - alpha) * current);
    }
    return total / static_cast<double>(n);
}

TwoMeans two_means_1d(std::span<const double> values, int restarts, std::uint64_t seed) {
    const auto n = values.size();
    TwoMeans best;
    best.sse = std::numeric_limits<double>::infinity();
    if (n == 0) throw EmptySeriesError("two-means on an empty set");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (*lo_it == *hi_it) {
        best.low_centre = best.high_centre = *lo_it;
        best.sse = 0.0;
        best.is_high.assign(n, false);
        return best;
    }

    Rng rng(seed);
    std::vector<bool> assign(n);
    for (int r = 0; r < restarts; ++r) {
        // Seed with two distinct observations.
        const double a = values[uniform_index(rng, n)];
        double b = values[uniform_index(rng, n)];
        while (b == a) b = values[uniform_index(rng, n)];
        double low = std::min(a, b);
        double high = std::max(a, b);

        for (int iter = 0; iter < 1000; ++iter) {
            bool changed = iter == 0;
            double sum_low = 0.0, sum_high = 0.0;
            std::size_t n_low = 0, n_high = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool h = std::abs(values[i] - high) < std::abs(values[i] - low);
                if (h != assign[i]) changed = true;
                assign[i] = h;
                if (h) {
                    sum_high += values[i];
                    ++n_high;
                } else {
                    sum_low += values[i];
                    ++n_low;
                }
            }
            if (n_low > 0) low = sum_low / static_cast<double>(n_low);
            if (n_high > 0) high = sum_high / static_cast<double>(n_high);
            if (!changed) break;
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = assign[i] ? high : low;
            sse += (values[i] - c) * (values[i] - c);
        }
        if (sse < best.sse) {
            best.sse = sse;
            best.low_centre = low;
            best.high_centre = high;
            best.is_high = assign;
        }
    }
    return best;
}

double pool_vq(const QualityTimeSeries& ts, const PoolingConfig& cfg) {
    cfg.validate();
    const auto q = playing_or_throw(ts);
    const auto clusters = two_means_1d(q, cfg.vq.kmeans_restarts, cfg.vq.seed);
    double sum_low = 0.0, sum_high = 0.0;
    std::size_t n_low = 0, n_high = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (clusters.is_high[i]) {
            sum_high += q[i];
            ++n_high;
        } else {
            sum_low += q[i];
            ++n_low;
        }
    }
    if (n_low == 0 || n_high == 0) return mean_of(q);
    const double mean_low = sum_low / static_cast<double>(n_low);
    const double mean_high = sum_high / static_cast<double>(n_high);
    const double worse = ts.higher_is_better ? mean_low : mean_high;
    const double better = ts.higher_is_better ? mean_high : mean_low;
    return cfg.vq.w_low * worse + (1.0 - cfg.vq.w_low) * better;
}

double pool(const QualityTimeSeries& ts, const PoolingConfig& cfg, double fps) {
    switch (cfg.method) {
        case PoolingMethod::mean: return pool_mean(ts);
        case PoolingMethod::hysteresis: return pool_hysteresis(ts, cfg, fps);
        case PoolingMethod::vq: return pool_vq(ts, cfg);
    }
    throw InvalidArgumentError("unknown pooling method");
}

}  // namespace atlas
