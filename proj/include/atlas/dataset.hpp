#pragma once

#include "atlas/baselines.hpp"
#include "atlas/eval.hpp"
#include "atlas/features.hpp"
#include "atlas/metrics.hpp"
#include "atlas/pooling.hpp"
#include "atlas/video_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace atlas {

inline constexpr int kManifestFormatVersion = 1;

/// One (content, pattern) session. Paths are relative to the manifest directory.
struct ManifestSession {
    std::string content_id;
    std::string pattern_id;
    std::filesystem::path pattern_file;
    double mos = 0.0;
    std::filesystem::path ref_video;
    std::optional<std::filesystem::path> dist_video;
    std::optional<std::filesystem::path> scores_csv;

    std::string label() const { return content_id + "/" + pattern_id; }
};

struct Manifest {
    std::string name;
    int width = 0;
    int height = 0;
    double fps = 0.0;
    /// Polarity of externally supplied score CSVs.
    bool scores_higher_is_better = true;
    std::vector<ManifestSession> sessions;
    /// Directory the relative paths resolve against; not serialized.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
    void validate() const;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& m);

struct ScoringOptions {
    /// Unset means per-frame scores come from each session's scores_csv.
    std::optional<MetricId> metric;
    MetricConfig metric_config;
    unsigned threads = 1;
};

/// A manifest session with its playout timeline and per-frame quality.
struct ScoredSession {
    ManifestSession entry;
    PlayoutPattern pattern;
    FrameAlignment alignment;
    QualityTimeSeries series;
};

/// Errors are rethrown with the session label prepended.
std::vector<ScoredSession> score_manifest(const Manifest& m, const ScoringOptions& opts,
                                          std::vector<std::string>* warnings = nullptr);

Dataset build_dataset(const std::string& name, const std::vector<ScoredSession>& sessions,
                      const PoolingConfig& pooling, unsigned threads = 1);

std::vector<BaselineSession> baseline_sessions(const std::vector<ScoredSession>& sessions);

/// MS-SSIM scale count that fits a frame of the given size, capped at `requested`.
int fitting_msssim_scales(int width, int height, int requested = 5);

}  // namespace atlas
