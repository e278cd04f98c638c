#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atlas {

template <typename Fn, std::size_t N>
SimplexResult<N> nelder_mead(Fn&& f, std::array<double, N> start, std::array<double, N> step, int max_iterations,
                             double tolerance) {
    using Point = std::array<double, N>;
    std::array<Point, N + 1> simplex;
    std::array<double, N + 1> values;
    simplex[0] = start;
    for (std::size_t k = 0; k < N; ++k) {
        simplex[k + 1] = start;
        simplex[k + 1][k] += step[k];
    }
    for (std::size_t k = 0; k <= N; ++k) values[k] = f(simplex[k]);

    auto combine = [](const Point& a, const Point& b, double t) {
        Point out;
        for (std::size_t k = 0; k < N; ++k) out[k] = a[k] + t * (b[k] - a[k]);
        return out;
    };

    std::array<std::size_t, N + 1> order;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[N - 1];
        if (std::abs(values[worst] - values[best]) <= tolerance * (std::abs(values[best]) + 1e-300)) break;

        Point centroid{};
        for (std::size_t k = 0; k <= N; ++k) {
            if (k == worst) continue;
            for (std::size_t c = 0; c < N; ++c) centroid[c] += simplex[k][c] / static_cast<double>(N);
        }
        const Point reflected = combine(centroid, simplex[worst], -1.0);
        const double fr = f(reflected);
        if (fr < values[best]) {
            const Point expanded = combine(centroid, simplex[worst], -2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            const bool outside = fr < values[worst];
            const Point contracted = outside ? combine(centroid, reflected, 0.5) : combine(centroid, simplex[worst], 0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, values[worst])) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                for (std::size_t k = 0; k <= N; ++k) {
                    if (k == best) continue;
                    simplex[k] = combine(simplex[best], simplex[k], 0.5);
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best]};
}

}  // namespace atlas
