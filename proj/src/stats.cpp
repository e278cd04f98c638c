#include "atlas/stats.hpp"

#include "atlas/error.hpp"
#include "atlas/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace atlas {

std::vector<double> average_ranks(std::span<const double> values) {
    const auto n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t k = 0;
    while (k < n) {
        std::size_t end = k + 1;
        while (end < n && values[order[end]] == values[order[k]]) ++end;
        const double rank = 0.5 * static_cast<double>(k + 1 + end);  // mean of positions k+1 .. end
        for (std::size_t t = k; t < end; ++t) ranks[order[t]] = rank;
        k = end;
    }
    return ranks;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw SizeMismatchError("correlation inputs differ in length");
    const auto n = static_cast<double>(a.size());
    if (a.size() < 2) return std::nullopt;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double da = a[k] - ma;
        const double db = b[k] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> srocc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw SizeMismatchError("correlation inputs differ in length");
    if (a.size() < 3) throw InvalidArgumentError("SROCC needs at least three pairs");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

double Logistic4::operator()(double x) const {
    const double scale = std::max(std::abs(b4), 1e-300);
    const double z = -(x - b3) / scale;
    // 1 / (1 + e^z) without overflow
    const double g = z > 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    return b2 + (b1 - b2) * g;
}

namespace {

double sse_of(const Logistic4& f, std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] - f(x[k]);
        s += r * r;
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::max();
}

/// Optimal amplitude/offset for a fixed sigmoid shape.
Logistic4 refit_amplitude(Logistic4 f, std::span<const double> x, std::span<const double> y) {
    Logistic4 shape = f;
    shape.b1 = 1.0;
    shape.b2 = 0.0;
    const auto n = static_cast<double>(x.size());
    double mg = 0.0, my = 0.0;
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        g[k] = shape(x[k]);
        mg += g[k];
        my += y[k];
    }
    mg /= n;
    my /= n;
    double sgy = 0.0, sgg = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sgy += (g[k] - mg) * (y[k] - my);
        sgg += (g[k] - mg) * (g[k] - mg);
    }
    if (!(sgg > 0.0)) return f;
    const double c = sgy / sgg;
    f.b2 = my - c * mg;
    f.b1 = f.b2 + c;
    return f;
}

}  // namespace

LogisticFit fit_logistic(std::span<const double> pred, std::span<const double> mos, const LogisticOptions& opts) {
    if (pred.size() != mos.size()) throw SizeMismatchError("logistic fit inputs differ in length");
    if (pred.empty()) throw InvalidArgumentError("logistic fit needs data");
    const auto n = static_cast<double>(pred.size());
    const double mean = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
    double var = 0.0;
    for (double p : pred) var += (p - mean) * (p - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> sorted(pred.begin(), pred.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                            : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    const double mos_max = *std::max_element(mos.begin(), mos.end());
    const double mos_min = *std::min_element(mos.begin(), mos.end());
    const double mos_span = std::max(mos_max - mos_min, 1e-12);
    const double width = sd > 0.0 ? sd : 1.0;

    auto objective = [&](const std::array<double, 4>& b) { return sse_of({b[0], b[1], b[2], b[3]}, pred, mos); };

    // Start 0: the conventional initialization. Start 1: a very wide sigmoid,
    // i.e. the (nearly) linear regime. Further starts: seeded perturbations.
    std::vector<Logistic4> starts;
    starts.push_back({mos_max, mos_min, median, width / 4.0});
    starts.push_back(refit_amplitude({mos_max, mos_min, mean, 1e3 * width}, pred, mos));
    Rng rng(opts.seed);
    while (static_cast<int>(starts.size()) < std::max(opts.restarts, 1)) {
        starts.push_back({mos_max, mos_min, median + width * uniform(rng, -1.0, 1.0),
                          width * std::exp(uniform(rng, -2.0, 2.0))});
    }
    starts.resize(static_cast<std::size_t>(std::max(opts.restarts, 1)));

    LogisticFit best;
    best.sse = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        const std::array<double, 4> step = {0.1 * mos_span, 0.1 * mos_span, 0.1 * width, 0.1 * std::abs(s.b4)};
        const auto res = nelder_mead(objective, std::array<double, 4>{s.b1, s.b2, s.b3, s.b4}, step,
                                     opts.max_iterations);
        Logistic4 fitted{res.x[0], res.x[1], res.x[2], res.x[3]};
        const Logistic4 polished = refit_amplitude(fitted, pred, mos);
        double sse = res.value;
        if (const double ps = sse_of(polished, pred, mos); ps < sse) {
            fitted = polished;
            sse = ps;
        }
        if (sse < best.sse) {
            best.sse = sse;
            best.params = fitted;
        }
    }
    return best;
}

std::optional<double> lcc_after_logistic(std::span<const double> pred, std::span<const double> mos,
                                         const LogisticOptions& opts) {
    if (pred.size() != mos.size()) throw SizeMismatchError("correlation inputs differ in length");
    if (pred.size() < 5) throw InvalidArgumentError("logistic LCC needs at least five pairs");
    const auto [lo, hi] = std::minmax_element(pred.begin(), pred.end());
    if (*lo == *hi) return std::nullopt;
    const auto fit = fit_logistic(pred, mos, opts);
    std::vector<double> mapped(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) mapped[k] = fit.params(pred[k]);
    return pearson(mapped, mos);
}

RanksumResult ranksum(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InvalidArgumentError("rank-sum test needs two non-empty samples");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);
    const auto n1 = static_cast<double>(a.size());
    const auto n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) rank_sum += ranks[k];

    // Tie correction from the pooled tie groups.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t k = 0; k < sorted.size();) {
        std::size_t end = k + 1;
        while (end < sorted.size() && sorted[end] == sorted[k]) ++end;
        const auto t = static_cast<double>(end - k);
        tie_term += t * t * t - t;
        k = end;
    }

    RanksumResult res;
    res.u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        res.z = 0.0;
        res.p = 1.0;
        return res;
    }
    res.z = (res.u - mu) / std::sqrt(var);
    res.p = std::erfc(std::abs(res.z) / std::sqrt(2.0));
    return res;
}

std::optional<double> finite_median(std::span<const double> values) {
    std::vector<double> v;
    for (double x : values)
        if (std::isfinite(x)) v.push_back(x);
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace atlas
