#include "atlas/baselines.hpp"

#include "atlas/error.hpp"
#include "atlas/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atlas {

void BaselineParams::validate() const {
    if (vsqm.segments < 1) throw InvalidArgumentError("VsQM needs at least one segment");
    if (static_cast<int>(vsqm.weights.size()) != vsqm.segments)
        throw InvalidArgumentError("VsQM weight count must equal the segment count");
    for (double w : vsqm.weights)
        if (!(w >= 0.0)) throw InvalidArgumentError("VsQM weights must be non-negative");
    if (!(sqi.recovery_tau > 0.0)) throw InvalidArgumentError("SQI recovery tau must be positive");
    if (!(sqi.penalty_rate >= 0.0)) throw InvalidArgumentError("SQI penalty rate must be non-negative");
}

std::string_view baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::ftw: return "ftw";
        case BaselineKind::vsqm: return "vsqm";
        case BaselineKind::sqi: return "sqi";
    }
    return "unknown";
}

BaselineKind parse_baseline(std::string_view name) {
    if (name == "ftw") return BaselineKind::ftw;
    if (name == "vsqm") return BaselineKind::vsqm;
    if (name == "sqi") return BaselineKind::sqi;
    throw InvalidArgumentError("unknown baseline '" + std::string(name) + "'");
}

bool is_baseline_name(std::string_view name) { return name == "ftw" || name == "vsqm" || name == "sqi"; }

double ftw(double mean_stall_s, double n_stalls, const BaselineParams& p) {
    if (mean_stall_s < 0.0 || n_stalls < 0.0) throw InvalidArgumentError("FTW inputs must be non-negative");
    const auto& f = p.ftw;
    return f.a * std::exp(-(f.b * mean_stall_s + f.c) * n_stalls) + f.d;
}

double ftw(const PlayoutPattern& pattern, const BaselineParams& p) {
    pattern.validate();
    const auto stalls = pattern.stalls();
    double total = 0.0;
    for (const auto& s : stalls) total += s.duration_s;
    const double n = static_cast<double>(stalls.size());
    return ftw(n > 0 ? total / n : 0.0, n, p);
}

double vsqm(const PlayoutPattern& pattern, const BaselineParams& p) {
    p.validate();
    const double duration = displayed_duration(pattern);
    const int segments = p.vsqm.segments;
    const double part = duration / segments;

    std::vector<double> stalled(static_cast<std::size_t>(segments), 0.0);
    double elapsed_stall = 0.0;
    for (const auto& s : pattern.stalls()) {
        const double start = static_cast<double>(s.at_src_frame) / pattern.fps + elapsed_stall;
        const double end = start + s.duration_s;
        for (int j = 0; j < segments; ++j) {
            const double lo = j * part;
            const double hi = (j + 1) * part;
            stalled[static_cast<std::size_t>(j)] += std::max(0.0, std::min(end, hi) - std::max(start, lo));
        }
        elapsed_stall += s.duration_s;
    }
    double degradation = 0.0;
    for (int j = 0; j < segments; ++j)
        degradation += p.vsqm.weights[static_cast<std::size_t>(j)] * stalled[static_cast<std::size_t>(j)] / part;
    return p.vsqm.scale * std::exp(-degradation);
}

double sqi(const QualityTimeSeries& ts, const FrameAlignment& align, double fps, const BaselineParams& p) {
    p.validate();
    ts.validate();
    if (ts.size() != align.size()) throw AlignmentError("series and alignment lengths differ");
    if (!(fps > 0.0)) throw InvalidArgumentError("fps must be positive");
    const auto n = ts.size();
    if (align.playing_count() == 0) throw EmptySeriesError("SQI needs at least one playing frame");

    // Presentation channel, held through stalls.
    std::vector<double> presentation(n, 0.0);
    auto quality = [&](std::size_t d) { return ts.higher_is_better ? ts.values[d] : 1.0 - ts.values[d]; };
    std::size_t first_playing = 0;
    while (ts.stalled[first_playing]) ++first_playing;
    double held = quality(first_playing);
    for (std::size_t d = 0; d < n; ++d) {
        if (!ts.stalled[d]) held = quality(d);
        presentation[d] = held;
    }

    const double dt = 1.0 / fps;
    const double rate = p.sqi.penalty_rate;
    const double tau = p.sqi.recovery_tau;
    double integral = 0.0;
    for (double v : presentation) integral += v * dt;

    // Stall channel, integrated piecewise in closed form.
    double level = 0.0;  // S at the start of the current piece
    std::size_t d = 0;
    while (d < n) {
        const bool stalled = ts.stalled[d];
        std::size_t end = d;
        while (end < n && ts.stalled[end] == stalled) ++end;
        const double length = static_cast<double>(end - d) * dt;
        if (stalled) {
            const double slope = rate * presentation[d];
            integral += level * length - 0.5 * slope * length * length;
            level -= slope * length;
        } else {
            integral += level * tau * (1.0 - std::exp(-length / tau));
            level *= std::exp(-length / tau);
        }
        d = end;
    }
    return integral / (static_cast<double>(n) * dt);
}

double baseline_score(BaselineKind kind, const BaselineSession& session, const BaselineParams& p) {
    switch (kind) {
        case BaselineKind::ftw: return ftw(session.pattern, p);
        case BaselineKind::vsqm: return vsqm(session.pattern, p);
        case BaselineKind::sqi: return sqi(session.series, session.alignment, session.pattern.fps, p);
    }
    throw InvalidArgumentError("unknown baseline");
}

BaselineParams tune_baseline(std::span<const BaselineSession> train, BaselineKind kind,
                             const std::vector<BaselineParams>& grid) {
    if (grid.empty()) throw InvalidArgumentError("baseline grid is empty");
    if (train.empty()) throw InvalidArgumentError("baseline tuning needs training sessions");
    std::vector<double> mos;
    for (const auto& s : train) mos.push_back(s.mos);

    std::size_t best_index = 0;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> scores(train.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (std::size_t k = 0; k < train.size(); ++k) scores[k] = baseline_score(kind, train[k], grid[g]);
        const auto rho = train.size() >= 3 ? srocc(scores, mos) : std::nullopt;
        const double value = rho.value_or(-std::numeric_limits<double>::infinity());
        if (value > best) {
            best = value;
            best_index = g;
        }
    }
    return grid[best_index];
}

std::vector<BaselineParams> default_baseline_grid(BaselineKind kind) {
    std::vector<BaselineParams> grid;
    switch (kind) {
        case BaselineKind::ftw:
            for (double b : {0.05, 0.15, 0.3})
                for (double c : {0.1, 0.19, 0.4}) {
                    BaselineParams p;
                    p.ftw.b = b;
                    p.ftw.c = c;
                    grid.push_back(p);
                }
            break;
        case BaselineKind::vsqm:
            for (const auto& w : std::vector<std::vector<double>>{{1, 1, 1}, {1, 2, 3}, {1, 3, 9}}) {
                BaselineParams p;
                const double s = w[0] + w[1] + w[2];
                p.vsqm.weights = {w[0] / s, w[1] / s, w[2] / s};
                grid.push_back(p);
            }
            break;
        case BaselineKind::sqi:
            for (double rate : {0.02, 0.05, 0.1, 0.2, 0.5})
                for (double tau : {1.0, 2.0, 5.0, 10.0}) {
                    BaselineParams p;
                    p.sqi.penalty_rate = rate;
                    p.sqi.recovery_tau = tau;
                    grid.push_back(p);
                }
            break;
    }
    return grid;
}

nlohmann::json to_json(BaselineKind kind, const BaselineParams& p) {
    switch (kind) {
        case BaselineKind::ftw: return {{"a", p.ftw.a}, {"b", p.ftw.b}, {"c", p.ftw.c}, {"d", p.ftw.d}};
        case BaselineKind::vsqm:
            return {{"segments", p.vsqm.segments}, {"weights", p.vsqm.weights}, {"scale", p.vsqm.scale}};
        case BaselineKind::sqi: return {{"penalty_rate", p.sqi.penalty_rate}, {"recovery_tau", p.sqi.recovery_tau}};
    }
    return {};
}

}  // namespace atlas
