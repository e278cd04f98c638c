#pragma once

#include "atlas/video_io.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing_helpers {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("atlas_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline atlas::PlayoutPattern simple_pattern(std::int64_t frames, double fps, double bitrate = 1000,
                                            double reference = 1000) {
    atlas::PlayoutPattern p;
    p.pattern_id = "p";
    p.fps = fps;
    p.source_frame_count = frames;
    p.reference_bitrate_kbps = reference;
    p.events.push_back(atlas::PlayEvent{0, frames - 1, bitrate});
    return p;
}

inline atlas::LumaPlane random_plane(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, 255);
    atlas::LumaPlane p(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) p(r, c) = static_cast<std::uint8_t>(d(rng));
    return p;
}

}  // namespace testing_helpers
