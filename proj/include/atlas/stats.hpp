#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace atlas {

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation; nullopt when either side is constant.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank-order correlation (Pearson on average ranks). Needs at
/// least three pairs; nullopt when either side is constant.
std::optional<double> srocc(std::span<const double> a, std::span<const double> b);

/// Monotone four-parameter logistic
///   f(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|)).
struct Logistic4 {
    double b1 = 1.0;
    double b2 = 0.0;
    double b3 = 0.0;
    double b4 = 1.0;

    double operator()(double x) const;
};

struct LogisticFit {
    Logistic4 params;
    double sse = 0.0;
};

struct LogisticOptions {
    int max_iterations = 2000;
    int restarts = 3;
    std::uint64_t seed = 0;
};

/// Least-squares logistic fit of mos against pred by Nelder-Mead.
LogisticFit fit_logistic(std::span<const double> pred, std::span<const double> mos, const LogisticOptions& opts = {});

/// Pearson correlation between the logistic-mapped predictions and mos.
/// Needs at least five pairs; nullopt for constant predictions.
std::optional<double> lcc_after_logistic(std::span<const double> pred, std::span<const double> mos,
                                         const LogisticOptions& opts = {});

struct RanksumResult {
    double u = 0.0;  // Mann-Whitney U of the first sample
    double z = 0.0;
    double p = 1.0;  // two-sided
};

/// Wilcoxon rank-sum test, normal approximation with tie correction.
RanksumResult ranksum(std::span<const double> a, std::span<const double> b);

/// Median of the finite entries; nullopt when there are none.
std::optional<double> finite_median(std::span<const double> values);

/// Derivative-free minimization (Nelder-Mead) used by the logistic fit.
template <std::size_t N>
struct SimplexResult {
    std::array<double, N> x;
    double value;
};

template <typename Fn, std::size_t N>
SimplexResult<N> nelder_mead(Fn&& f, std::array<double, N> start, std::array<double, N> step, int max_iterations,
                             double tolerance = 1e-12);

}  // namespace atlas

#include "atlas/detail/nelder_mead.hpp"
