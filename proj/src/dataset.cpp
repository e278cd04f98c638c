#include "atlas/dataset.hpp"

#include "atlas/error.hpp"
#include "atlas/parallel.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <set>

namespace atlas {

namespace fs = std::filesystem;

fs::path Manifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

void Manifest::validate() const {
    if (width < 16 || height < 16 || width % 2 || height % 2)
        throw DimensionError("manifest frame size must be even and at least 16x16");
    if (!(fps > 0.0)) throw InvalidArgumentError("manifest fps must be positive");
    if (sessions.empty()) throw InvalidArgumentError("manifest lists no sessions");
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& s : sessions) {
        if (s.content_id.empty() || s.pattern_id.empty())
            throw InvalidArgumentError("manifest session with empty content or pattern id");
        if (!seen.emplace(s.content_id, s.pattern_id).second)
            throw InvalidArgumentError("duplicate manifest session " + s.label());
        if (!s.dist_video && !s.scores_csv)
            throw InvalidArgumentError("session " + s.label() + " has neither dist_video nor scores_csv");
    }
}

nlohmann::json to_json(const Manifest& m) {
    nlohmann::json sessions = nlohmann::json::array();
    for (const auto& s : m.sessions) {
        nlohmann::json j = {{"content_id", s.content_id},
                            {"pattern_id", s.pattern_id},
                            {"pattern_file", s.pattern_file.generic_string()},
                            {"mos", s.mos},
                            {"ref_video", s.ref_video.generic_string()}};
        if (s.dist_video) j["dist_video"] = s.dist_video->generic_string();
        if (s.scores_csv) j["scores_csv"] = s.scores_csv->generic_string();
        sessions.push_back(std::move(j));
    }
    return {{"format_version", kManifestFormatVersion},
            {"name", m.name},
            {"width", m.width},
            {"height", m.height},
            {"fps", m.fps},
            {"scores_higher_is_better", m.scores_higher_is_better},
            {"sessions", sessions}};
}

Manifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    try {
        if (j.contains("format_version") && j.at("format_version").get<int>() != kManifestFormatVersion)
            throw FormatVersionError("unsupported manifest format_version " + j.at("format_version").dump());
        Manifest m;
        m.name = j.value("name", std::string("dataset"));
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.fps = j.at("fps").get<double>();
        m.scores_higher_is_better = j.value("scores_higher_is_better", true);
        m.base_dir = base_dir;
        for (const auto& s : j.at("sessions")) {
            ManifestSession e;
            e.content_id = s.at("content_id").get<std::string>();
            e.pattern_id = s.at("pattern_id").get<std::string>();
            e.pattern_file = s.at("pattern_file").get<std::string>();
            e.mos = s.at("mos").get<double>();
            e.ref_video = s.value("ref_video", std::string());
            if (s.contains("dist_video")) e.dist_video = s.at("dist_video").get<std::string>();
            if (s.contains("scores_csv")) e.scores_csv = s.at("scores_csv").get<std::string>();
            m.sessions.push_back(std::move(e));
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("manifest: ") + ex.what());
    }
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError("manifest " + path.string() + ": " + ex.what());
    }
    return manifest_from_json(j, path.parent_path());
}

void save_manifest(const fs::path& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << to_json(m).dump(2) << '\n';
    if (!out) throw IoError("failed writing manifest " + path.string());
}

namespace {

/// Rethrow the in-flight library error with the session label prepended, keeping its type.
[[noreturn]] void rethrow_for(const std::string& label) {
    try {
        throw;
    } catch (const IoError& ex) {
        throw IoError("session " + label + ": " + ex.what());
    } catch (const AlignmentError& ex) {
        throw AlignmentError("session " + label + ": " + ex.what());
    } catch (const MissingFrameError& ex) {
        throw MissingFrameError("session " + label + ": " + ex.what());
    } catch (const ParseError& ex) {
        throw ParseError("session " + label + ": " + ex.what());
    } catch (const InvalidPatternError& ex) {
        throw InvalidPatternError("session " + label + ": " + ex.what());
    } catch (const DimensionError& ex) {
        throw DimensionError("session " + label + ": " + ex.what());
    } catch (const Error& ex) {
        throw Error("session " + label + ": " + ex.what());
    }
}

}  // namespace

std::vector<ScoredSession> score_manifest(const Manifest& m, const ScoringOptions& opts,
                                          std::vector<std::string>* warnings) {
    m.validate();
    const std::size_t n = m.sessions.size();

    // Check inputs up front so a missing file is reported before any scoring work.
    for (const auto& s : m.sessions) {
        const auto need = [&](const fs::path& p, const char* what) {
            if (!fs::exists(m.resolve(p)))
                throw IoError("session " + s.label() + ": " + what + " not found: " + m.resolve(p).string());
        };
        need(s.pattern_file, "pattern file");
        if (opts.metric) {
            if (!s.dist_video) throw IoError("session " + s.label() + ": no dist_video for metric scoring");
            need(s.ref_video, "reference video");
            need(*s.dist_video, "distorted video");
        } else {
            if (!s.scores_csv) throw IoError("session " + s.label() + ": no scores_csv");
            need(*s.scores_csv, "scores CSV");
        }
    }

    std::map<fs::path, FrameSequence> refs;
    if (opts.metric) {
        for (const auto& s : m.sessions) {
            const auto p = m.resolve(s.ref_video);
            if (refs.count(p)) continue;
            try {
                refs.emplace(p, read_yuv(p, m.width, m.height, m.fps));
            } catch (...) {
                rethrow_for(s.label());
            }
        }
    }

    std::vector<ScoredSession> out(n);
    std::vector<std::vector<std::string>> notes(n);
    parallel_for(n, opts.threads, [&](std::size_t k) {
        const auto& s = m.sessions[k];
        try {
            auto& o = out[k];
            o.entry = s;
            o.pattern = load_pattern(m.resolve(s.pattern_file));
            if (o.pattern.fps != m.fps)
                throw AlignmentError("pattern fps " + std::to_string(o.pattern.fps) + " differs from manifest fps");
            o.alignment = build_alignment(o.pattern);
            if (opts.metric) {
                const auto& ref = refs.at(m.resolve(s.ref_video));
                if (static_cast<std::int64_t>(ref.size()) != o.pattern.source_frame_count)
                    throw AlignmentError("reference has " + std::to_string(ref.size()) + " frames, pattern expects " +
                                         std::to_string(o.pattern.source_frame_count));
                const auto dist = read_yuv(m.resolve(*s.dist_video), m.width, m.height, m.fps);
                o.series = score_sequence(ref, dist, o.alignment, *opts.metric, opts.metric_config);
            } else {
                o.series = ingest_scores(m.resolve(*s.scores_csv), o.alignment, "csv", m.scores_higher_is_better,
                                         &notes[k]);
            }
        } catch (...) {
            rethrow_for(s.label());
        }
    });
    if (warnings)
        for (std::size_t k = 0; k < n; ++k)
            for (auto& w : notes[k]) warnings->push_back("session " + m.sessions[k].label() + ": " + w);
    return out;
}

Dataset build_dataset(const std::string& name, const std::vector<ScoredSession>& sessions,
                      const PoolingConfig& pooling, unsigned threads) {
    if (sessions.empty()) throw InvalidArgumentError("no sessions to build a dataset from");
    Dataset ds;
    ds.name = name;
    ds.higher_is_better = sessions.front().series.higher_is_better;
    ds.samples.resize(sessions.size());
    parallel_for(sessions.size(), threads, [&](std::size_t k) {
        const auto& s = sessions[k];
        try {
            auto& q = ds.samples[k];
            q.content_id = s.entry.content_id;
            q.pattern_id = s.entry.pattern_id;
            q.mos = s.entry.mos;
            q.features = extract_features(s.series, s.pattern, pooling);
            q.m_stall = extract_m_stall(s.pattern);
        } catch (...) {
            rethrow_for(s.entry.label());
        }
    });
    ds.has_bitrate_variation = false;
    for (const auto& s : sessions)
        for (const auto& p : s.pattern.plays())
            if (p.bitrate_kbps < s.pattern.reference_bitrate_kbps) ds.has_bitrate_variation = true;
    return ds;
}

std::vector<BaselineSession> baseline_sessions(const std::vector<ScoredSession>& sessions) {
    std::vector<BaselineSession> out;
    out.reserve(sessions.size());
    for (const auto& s : sessions)
        out.push_back({s.entry.content_id, s.entry.pattern_id, s.pattern, s.alignment, s.series, s.entry.mos});
    return out;
}

int fitting_msssim_scales(int width, int height, int requested) {
    const int side = std::min(width, height);
    int scales = 0;
    while (scales < requested && side >= 11 * (1 << scales)) ++scales;
    if (scales == 0) throw DimensionError("frame too small for MS-SSIM");
    return scales;
}

}  // namespace atlas
