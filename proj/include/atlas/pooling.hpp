#pragma once

#include "atlas/metrics.hpp"

#include <cstdint>
#include <span>
#include <string_view>

namespace atlas {

enum class PoolingMethod { mean, hysteresis, vq };

std::string_view pooling_name(PoolingMethod m);
PoolingMethod parse_pooling(std::string_view name);

struct HysteresisParams {
    double tau_s = 2.0;   // memory / look-ahead window
    double alpha = 0.8;   // weight of the memory (past minimum) term
};

struct VqParams {
    double w_low = 0.75;  // weight of the perceptually worse cluster
    int kmeans_restarts = 10;
    std::uint64_t seed = 0;
};

struct PoolingConfig {
    PoolingMethod method = PoolingMethod::mean;
    HysteresisParams hysteresis;
    VqParams vq;

    void validate() const;
};

double pool_mean(const QualityTimeSeries& ts);
double pool_hysteresis(const QualityTimeSeries& ts, const PoolingConfig& cfg, double fps);
double pool_vq(const QualityTimeSeries& ts, const PoolingConfig& cfg);

/// Apply the method selected in cfg.
double pool(const QualityTimeSeries& ts, const PoolingConfig& cfg, double fps);

/// Result of a seeded 1-D two-means clustering.
struct TwoMeans {
    double low_centre = 0.0;
    double high_centre = 0.0;
    double sse = 0.0;
    std::vector<bool> is_high;
};

TwoMeans two_means_1d(std::span<const double> values, int restarts, std::uint64_t seed);

}  // namespace atlas
