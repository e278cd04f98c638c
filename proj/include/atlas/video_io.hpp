#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace atlas {

/// 8-bit luma plane, row-major (rows = height, cols = width).
using LumaPlane = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FrameSequence {
    int width = 0;
    int height = 0;
    double fps = 0.0;
    std::vector<LumaPlane> frames;

    std::size_t size() const { return frames.size(); }
};

/// Read planar 8-bit YUV 4:2:0; chroma is discarded.
FrameSequence read_yuv(const std::filesystem::path& path, int width, int height, double fps);

/// Write luma planes as 4:2:0 with neutral (128) chroma.
void write_yuv(const std::filesystem::path& path, const FrameSequence& seq);

struct PlayEvent {
    std::int64_t first_src_frame = 0;
    std::int64_t last_src_frame = 0;  // inclusive
    double bitrate_kbps = 0.0;

    bool operator==(const PlayEvent&) const = default;
};

/// Playback freezes for duration_s before source frame at_src_frame is shown.
struct StallEvent {
    std::int64_t at_src_frame = 0;
    double duration_s = 0.0;

    bool operator==(const StallEvent&) const = default;
};

using PlayoutEvent = std::variant<PlayEvent, StallEvent>;

struct PlayoutPattern {
    std::string pattern_id;
    double fps = 0.0;
    std::int64_t source_frame_count = 0;
    double reference_bitrate_kbps = 0.0;
    std::vector<PlayoutEvent> events;

    /// Throws InvalidPatternError when coverage, ordering or range rules fail.
    void validate() const;

    std::vector<PlayEvent> plays() const;
    /// Stalls in timeline order.
    std::vector<StallEvent> stalls() const;
    /// Bitrate at which each source frame is played.
    std::vector<double> frame_bitrates() const;

    bool operator==(const PlayoutPattern&) const = default;
};

nlohmann::json to_json(const PlayoutPattern& pattern);
PlayoutPattern pattern_from_json(const nlohmann::json& j);
PlayoutPattern load_pattern(const std::filesystem::path& path);
void save_pattern(const std::filesystem::path& path, const PlayoutPattern& pattern);

struct AlignmentEntry {
    std::int64_t displayed_index = 0;
    std::int64_t source_index = 0;
    bool stalled = false;

    bool operator==(const AlignmentEntry&) const = default;
};

struct FrameAlignment {
    std::vector<AlignmentEntry> entries;

    std::size_t size() const { return entries.size(); }
    /// Frozen frames displayed before entry d (the pairing offset j).
    std::int64_t offset(std::size_t d) const { return entries[d].displayed_index - entries[d].source_index; }
    std::vector<bool> stall_mask() const;
    std::size_t playing_count() const;
};

/// Number of frozen frames a stall adds to the displayed timeline.
std::int64_t stall_frame_count(double duration_s, double fps);

FrameAlignment build_alignment(const PlayoutPattern& pattern);

/// Content time plus total stall time, in seconds.
double displayed_duration(const PlayoutPattern& pattern);

}  // namespace atlas
