#pragma once

#include "atlas/metrics.hpp"
#include "atlas/video_io.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace atlas {

/// Exponential stall-statistics model: a * exp(-(b * mean_stall + c) * n) + d.
struct FtwParams {
    double a = 3.5;
    double b = 0.15;
    double c = 0.19;
    double d = 1.5;
};

/// Stall time per timeline segment, weighted toward the end of the session.
struct VsqmParams {
    int segments = 3;
    std::vector<double> weights = {1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0};
    double scale = 5.0;
};

/// Parameterized streaming quality index: a presentation-quality channel
/// plus a stall channel that drops linearly during a stall (rate
/// proportional to the quality just before it) and recovers exponentially.
struct SqiParams {
    double penalty_rate = 0.1;  // per second
    double recovery_tau = 5.0;  // seconds
};

struct BaselineParams {
    FtwParams ftw;
    VsqmParams vsqm;
    SqiParams sqi;

    void validate() const;
};

enum class BaselineKind { ftw, vsqm, sqi };

std::string_view baseline_name(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);
bool is_baseline_name(std::string_view name);

double ftw(double mean_stall_s, double n_stalls, const BaselineParams& p);
double ftw(const PlayoutPattern& pattern, const BaselineParams& p);
double vsqm(const PlayoutPattern& pattern, const BaselineParams& p);
/// Distortion-polarity series enter the presentation channel as 1 - score.
double sqi(const QualityTimeSeries& ts, const FrameAlignment& align, double fps, const BaselineParams& p);

/// Everything a baseline may look at for one session.
struct BaselineSession {
    std::string content_id;
    std::string pattern_id;
    PlayoutPattern pattern;
    FrameAlignment alignment;
    QualityTimeSeries series;
    double mos = 0.0;
};

double baseline_score(BaselineKind kind, const BaselineSession& session, const BaselineParams& p);

/// Exhaustive search maximizing SROCC against the training MOS; ties go to
/// the earliest candidate.
BaselineParams tune_baseline(std::span<const BaselineSession> train, BaselineKind kind,
                             const std::vector<BaselineParams>& grid);

std::vector<BaselineParams> default_baseline_grid(BaselineKind kind);

nlohmann::json to_json(BaselineKind kind, const BaselineParams& p);

}  // namespace atlas
