#include "atlas/video_io.hpp"

#include "atlas/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace atlas {

namespace {

void check_dimensions(int width, int height) {
    if (width < 16 || height < 16)
        throw DimensionError("frame dimensions must be at least 16x16, got " + std::to_string(width) + "x" +
                             std::to_string(height));
    if (width % 2 != 0 || height % 2 != 0)
        throw DimensionError("4:2:0 frames need even dimensions, got " + std::to_string(width) + "x" +
                             std::to_string(height));
}

std::size_t frame_bytes(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3 / 2;
}

}  // namespace

FrameSequence read_yuv(const std::filesystem::path& path, int width, int height, double fps) {
    check_dimensions(width, height);
    if (!(fps > 0.0)) throw InvalidArgumentError("fps must be positive");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const auto file_size = std::filesystem::file_size(path);
    const std::size_t per_frame = frame_bytes(width, height);
    if (file_size % per_frame != 0)
        throw SizeMismatchError(path.string() + ": size " + std::to_string(file_size) +
                                " is not a multiple of the frame size " + std::to_string(per_frame));

    FrameSequence seq;
    seq.width = width;
    seq.height = height;
    seq.fps = fps;
    const std::size_t count = file_size / per_frame;
    const std::size_t luma = static_cast<std::size_t>(width) * height;
    seq.frames.reserve(count);
    for (std::size_t f = 0; f < count; ++f) {
        LumaPlane plane(height, width);
        in.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(luma));
        in.ignore(static_cast<std::streamsize>(per_frame - luma));
        if (!in) throw IoError(path.string() + ": short read at frame " + std::to_string(f));
        seq.frames.push_back(std::move(plane));
    }
    return seq;
}

void write_yuv(const std::filesystem::path& path, const FrameSequence& seq) {
    check_dimensions(seq.width, seq.height);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const std::size_t luma = static_cast<std::size_t>(seq.width) * seq.height;
    const std::vector<char> chroma(frame_bytes(seq.width, seq.height) - luma, static_cast<char>(128));
    for (const auto& plane : seq.frames) {
        if (plane.rows() != seq.height || plane.cols() != seq.width)
            throw DimensionError("frame size does not match sequence dimensions");
        out.write(reinterpret_cast<const char*>(plane.data()), static_cast<std::streamsize>(luma));
        out.write(chroma.data(), static_cast<std::streamsize>(chroma.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void PlayoutPattern::validate() const {
    auto fail = [&](const std::string& what) {
        throw InvalidPatternError("pattern '" + pattern_id + "': " + what);
    };
    if (!(fps > 0.0)) fail("fps must be positive");
    if (source_frame_count < 1) fail("source_frame_count must be positive");
    if (!(reference_bitrate_kbps > 0.0)) fail("reference bitrate must be positive");

    std::int64_t next_frame = 0;
    std::int64_t last_stall = -1;
    for (const auto& ev : events) {
        if (const auto* p = std::get_if<PlayEvent>(&ev)) {
            if (p->first_src_frame != next_frame)
                fail("play segment starts at " + std::to_string(p->first_src_frame) + ", expected " +
                     std::to_string(next_frame));
            if (p->last_src_frame < p->first_src_frame) fail("play segment ends before it starts");
            if (!(p->bitrate_kbps > 0.0) || p->bitrate_kbps > reference_bitrate_kbps)
                fail("bitrate outside (0, reference]");
            next_frame = p->last_src_frame + 1;
        } else {
            const auto& s = std::get<StallEvent>(ev);
            if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) fail("stall duration must be positive");
            if (s.at_src_frame < 0) fail("stall before the first source frame");
            if (s.at_src_frame >= source_frame_count) fail("trailing stall after the last source frame");
            if (s.at_src_frame < last_stall) fail("stalls out of order");
            last_stall = s.at_src_frame;
        }
    }
    if (next_frame != source_frame_count)
        fail("play segments cover " + std::to_string(next_frame) + " of " + std::to_string(source_frame_count) +
             " source frames");
}

std::vector<PlayEvent> PlayoutPattern::plays() const {
    std::vector<PlayEvent> out;
    for (const auto& ev : events)
        if (const auto* p = std::get_if<PlayEvent>(&ev)) out.push_back(*p);
    return out;
}

std::vector<StallEvent> PlayoutPattern::stalls() const {
    std::vector<StallEvent> out;
    for (const auto& ev : events)
        if (const auto* s = std::get_if<StallEvent>(&ev)) out.push_back(*s);
    return out;
}

std::vector<double> PlayoutPattern::frame_bitrates() const {
    std::vector<double> rates(static_cast<std::size_t>(source_frame_count), 0.0);
    for (const auto& p : plays())
        for (auto f = p.first_src_frame; f <= p.last_src_frame; ++f) rates[static_cast<std::size_t>(f)] = p.bitrate_kbps;
    return rates;
}

nlohmann::json to_json(const PlayoutPattern& pattern) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& ev : pattern.events) {
        if (const auto* p = std::get_if<PlayEvent>(&ev)) {
            events.push_back({{"type", "play"},
                              {"first", p->first_src_frame},
                              {"last", p->last_src_frame},
                              {"bitrate_kbps", p->bitrate_kbps}});
        } else {
            const auto& s = std::get<StallEvent>(ev);
            events.push_back({{"type", "stall"}, {"at", s.at_src_frame}, {"duration_s", s.duration_s}});
        }
    }
    return {{"pattern_id", pattern.pattern_id},
            {"fps", pattern.fps},
            {"source_frame_count", pattern.source_frame_count},
            {"reference_bitrate_kbps", pattern.reference_bitrate_kbps},
            {"events", std::move(events)}};
}

PlayoutPattern pattern_from_json(const nlohmann::json& j) {
    try {
        PlayoutPattern p;
        p.pattern_id = j.at("pattern_id").get<std::string>();
        p.fps = j.at("fps").get<double>();
        p.source_frame_count = j.at("source_frame_count").get<std::int64_t>();
        p.reference_bitrate_kbps = j.at("reference_bitrate_kbps").get<double>();
        for (const auto& e : j.at("events")) {
            const auto type = e.at("type").get<std::string>();
            if (type == "play") {
                p.events.emplace_back(PlayEvent{e.at("first").get<std::int64_t>(), e.at("last").get<std::int64_t>(),
                                                e.at("bitrate_kbps").get<double>()});
            } else if (type == "stall") {
                p.events.emplace_back(StallEvent{e.at("at").get<std::int64_t>(), e.at("duration_s").get<double>()});
            } else {
                throw ParseError("unknown event type '" + type + "'");
            }
        }
        return p;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed playout pattern: ") + ex.what());
    }
}

PlayoutPattern load_pattern(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
    auto pattern = pattern_from_json(j);
    pattern.validate();
    return pattern;
}

void save_pattern(const std::filesystem::path& path, const PlayoutPattern& pattern) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(pattern).dump(2) << '\n';
}

std::vector<bool> FrameAlignment::stall_mask() const {
    std::vector<bool> mask(entries.size());
    for (std::size_t d = 0; d < entries.size(); ++d) mask[d] = entries[d].stalled;
    return mask;
}

std::size_t FrameAlignment::playing_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.stalled ? 0 : 1;
    return n;
}

std::int64_t stall_frame_count(double duration_s, double fps) {
    return static_cast<std::int64_t>(std::llround(duration_s * fps));
}

FrameAlignment build_alignment(const PlayoutPattern& pattern) {
    pattern.validate();
    const auto stalls = pattern.stalls();
    FrameAlignment align;
    std::int64_t displayed = 0;
    std::size_t next_stall = 0;
    auto freeze = [&](std::int64_t shown, std::int64_t frames) {
        for (std::int64_t k = 0; k < frames; ++k) align.entries.push_back({displayed++, shown, true});
    };
    for (std::int64_t src = 0; src < pattern.source_frame_count; ++src) {
        while (next_stall < stalls.size() && stalls[next_stall].at_src_frame == src) {
            freeze(src == 0 ? 0 : src - 1, stall_frame_count(stalls[next_stall].duration_s, pattern.fps));
            ++next_stall;
        }
        align.entries.push_back({displayed++, src, false});
    }
    return align;
}

double displayed_duration(const PlayoutPattern& pattern) {
    pattern.validate();
    double total = static_cast<double>(pattern.source_frame_count) / pattern.fps;
    for (const auto& s : pattern.stalls()) total += s.duration_s;
    return total;
}

}  // namespace atlas
