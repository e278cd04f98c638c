#include "atlas/synth.hpp"

#include "atlas/error.hpp"
#include "atlas/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace atlas {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
    if (n_contents < 1 || n_patterns < 1) throw InvalidArgumentError("synth: need at least one content and pattern");
    if (width < 16 || height < 16 || width % 2 || height % 2)
        throw DimensionError("synth: frame size must be even and at least 16x16");
    if (!(fps > 0.0)) throw InvalidArgumentError("synth: fps must be positive");
    if (min_frames < 1 || max_frames < min_frames) throw InvalidArgumentError("synth: empty frame count range");
    if (min_stalls < 0 || max_stalls < min_stalls) throw InvalidArgumentError("synth: empty stall count range");
    if (!(min_stall_s > 0.0) || max_stall_s < min_stall_s)
        throw InvalidArgumentError("synth: empty stall duration range");
    if (max_segments < 1) throw InvalidArgumentError("synth: max_segments must be positive");
    if (ladder_kbps.empty()) throw InvalidArgumentError("synth: empty bitrate ladder");
    for (double b : ladder_kbps)
        if (!(b > 0.0)) throw InvalidArgumentError("synth: ladder bitrates must be positive");
    if (!(noise_per_octave >= 0.0)) throw InvalidArgumentError("synth: noise_per_octave must be >= 0");
    if (!(min_complexity > 0.0 && min_complexity <= max_complexity))
        throw InvalidArgumentError("synth: complexity range must satisfy 0 < min <= max");
    if (!(mos_noise_sigma >= 0.0)) throw InvalidArgumentError("synth: mos_noise_sigma must be >= 0");
    if (!(mos_max > mos_min)) throw InvalidArgumentError("synth: empty MOS bounds");
}

double SynthConfig::reference_kbps() const { return *std::max_element(ladder_kbps.begin(), ladder_kbps.end()); }

nlohmann::json to_json(const SynthConfig& c) {
    return {{"n_contents", c.n_contents},       {"n_patterns", c.n_patterns},
            {"width", c.width},                 {"height", c.height},
            {"fps", c.fps},                     {"min_frames", c.min_frames},
            {"max_frames", c.max_frames},       {"min_stalls", c.min_stalls},
            {"max_stalls", c.max_stalls},       {"min_stall_s", c.min_stall_s},
            {"max_stall_s", c.max_stall_s},     {"max_segments", c.max_segments},
            {"ladder_kbps", c.ladder_kbps},     {"noise_per_octave", c.noise_per_octave},
            {"min_complexity", c.min_complexity},   {"max_complexity", c.max_complexity},
            {"mos_noise_sigma", c.mos_noise_sigma}, {"mos_min", c.mos_min},
            {"mos_max", c.mos_max},             {"coefficients", c.coefficients},
            {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
        c.n_contents = j.value("n_contents", c.n_contents);
        c.n_patterns = j.value("n_patterns", c.n_patterns);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.fps = j.value("fps", c.fps);
        c.min_frames = j.value("min_frames", c.min_frames);
        c.max_frames = j.value("max_frames", c.max_frames);
        c.min_stalls = j.value("min_stalls", c.min_stalls);
        c.max_stalls = j.value("max_stalls", c.max_stalls);
        c.min_stall_s = j.value("min_stall_s", c.min_stall_s);
        c.max_stall_s = j.value("max_stall_s", c.max_stall_s);
        c.max_segments = j.value("max_segments", c.max_segments);
        c.ladder_kbps = j.value("ladder_kbps", c.ladder_kbps);
        c.noise_per_octave = j.value("noise_per_octave", c.noise_per_octave);
        c.min_complexity = j.value("min_complexity", c.min_complexity);
        c.max_complexity = j.value("max_complexity", c.max_complexity);
        c.mos_noise_sigma = j.value("mos_noise_sigma", c.mos_noise_sigma);
        c.mos_min = j.value("mos_min", c.mos_min);
        c.mos_max = j.value("mos_max", c.mos_max);
        c.coefficients = j.value("coefficients", c.coefficients);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("synth config: ") + ex.what());
    }
    c.validate();
    return c;
}

PlayoutPattern gen_pattern(const SynthConfig& cfg, std::int64_t n_frames, Rng& rng) {
    cfg.validate();
    if (n_frames < 1) throw InvalidArgumentError("synth: pattern needs at least one frame");
    PlayoutPattern p;
    p.pattern_id = "pattern";
    p.fps = cfg.fps;
    p.source_frame_count = n_frames;
    p.reference_bitrate_kbps = cfg.reference_kbps();

    auto pick_distinct = [&](std::int64_t lo, std::int64_t hi, std::int64_t count) {
        std::vector<std::int64_t> pool;
        for (auto v = lo; v <= hi; ++v) pool.push_back(v);
        shuffle(pool, rng);
        pool.resize(static_cast<std::size_t>(std::min<std::int64_t>(count, static_cast<std::int64_t>(pool.size()))));
        std::sort(pool.begin(), pool.end());
        return pool;
    };

    // Strategy: 0 holds the top rate and rebuffers, 1 adapts the rate without
    // stalling, 2 mixes both.
    const auto strategy = uniform_index(rng, 3);
    const std::int64_t max_stalls = std::min<std::int64_t>(cfg.max_stalls, n_frames);
    std::int64_t lo_stalls = cfg.min_stalls, hi_stalls = max_stalls;
    if (strategy == 0) lo_stalls = std::min<std::int64_t>(std::max(cfg.min_stalls, 1), max_stalls);
    if (strategy == 1) hi_stalls = std::min<std::int64_t>(cfg.min_stalls, max_stalls);

    // Adapting strategies switch at least once when the ladder and clip allow it.
    const std::int64_t max_segments = std::min<std::int64_t>(cfg.max_segments, n_frames);
    const bool can_switch = cfg.ladder_kbps.size() > 1 && max_segments > 1;
    const auto n_segments = strategy == 0 ? std::int64_t{1} : uniform_int(rng, can_switch ? 2 : 1, max_segments);
    auto cuts = pick_distinct(1, n_frames - 1, n_segments - 1);
    std::vector<double> rates;
    std::size_t prev_level = 0;
    for (std::int64_t s = 0; s < n_segments; ++s) {
        if (strategy == 0) {
            rates.push_back(p.reference_bitrate_kbps);
            continue;
        }
        // Neighbouring segments play at different rungs.
        std::size_t level = uniform_index(rng, cfg.ladder_kbps.size() - (s > 0 ? 1 : 0));
        if (s > 0 && level >= prev_level) ++level;
        rates.push_back(cfg.ladder_kbps[level]);
        prev_level = level;
    }

    const auto n_stalls = uniform_int(rng, lo_stalls, std::max(lo_stalls, hi_stalls));
    const auto stall_at = pick_distinct(0, n_frames - 1, n_stalls);
    std::vector<double> stall_s;
    for (std::size_t k = 0; k < stall_at.size(); ++k)
        stall_s.push_back(std::round(uniform(rng, cfg.min_stall_s, cfg.max_stall_s) * 10.0) / 10.0);

    std::vector<std::int64_t> bounds = {0, n_frames};
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.insert(bounds.end(), stall_at.begin(), stall_at.end());
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
        const auto start = bounds[b];
        const auto it = std::find(stall_at.begin(), stall_at.end(), start);
        if (it != stall_at.end())
            p.events.emplace_back(StallEvent{start, std::max(stall_s[static_cast<std::size_t>(it - stall_at.begin())],
                                                             cfg.min_stall_s)});
        const auto segment = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), start) - cuts.begin());
        p.events.emplace_back(PlayEvent{start, bounds[b + 1] - 1, rates[segment]});
    }
    p.validate();
    return p;
}

PlayoutPattern gen_pattern(const SynthConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto n = uniform_int(rng, cfg.min_frames, cfg.max_frames);
    return gen_pattern(cfg, n, rng);
}

FrameSequence gen_reference(const SynthConfig& cfg, std::int64_t n_frames, Rng& rng) {
    cfg.validate();
    FrameSequence seq;
    seq.width = cfg.width;
    seq.height = cfg.height;
    seq.fps = cfg.fps;

    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double freq = uniform(rng, 1.0, 4.0) / cfg.width;
    const double speed = uniform(rng, 0.02, 0.15);
    const double amplitude = uniform(rng, 40.0, 80.0);
    const double texture_std = uniform(rng, 6.0, 16.0);
    const double fx = freq * std::cos(angle), fy = freq * std::sin(angle);

    Eigen::ArrayXXd texture(cfg.height, cfg.width);
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) texture(y, x) = texture_std * standard_normal(rng);

    for (std::int64_t t = 0; t < n_frames; ++t) {
        LumaPlane frame(cfg.height, cfg.width);
        const double phase = speed * static_cast<double>(t);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x) {
                const double v = 128.0 + amplitude * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y - phase)) +
                                 texture(y, x) + 2.0 * standard_normal(rng);
                frame(y, x) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
            }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

FrameSequence degrade(const SynthConfig& cfg, const FrameSequence& ref, const PlayoutPattern& pattern,
                      std::uint64_t noise_seed, double complexity) {
    if (!(complexity > 0.0)) throw InvalidArgumentError("synth: complexity must be positive");
    const auto align = build_alignment(pattern);
    if (static_cast<std::int64_t>(ref.size()) != pattern.source_frame_count)
        throw AlignmentError("synth: reference length differs from pattern frame count");
    const auto rates = pattern.frame_bitrates();
    const double top = pattern.reference_bitrate_kbps;

    std::vector<LumaPlane> played(ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
        const double strength = cfg.noise_per_octave * complexity * std::log2(top / rates[k]);
        Rng rng(derive_seed(noise_seed, {k}));
        LumaPlane out(ref.height, ref.width);
        for (int y = 0; y < ref.height; ++y)
            for (int x = 0; x < ref.width; ++x) {
                const double z = standard_normal(rng);
                const double v = static_cast<double>(ref.frames[k](y, x)) + std::round(strength * z);
                out(y, x) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        played[k] = std::move(out);
    }

    FrameSequence dist;
    dist.width = ref.width;
    dist.height = ref.height;
    dist.fps = ref.fps;
    dist.frames.reserve(align.size());
    for (const auto& e : align.entries) dist.frames.push_back(played[static_cast<std::size_t>(e.source_index)]);
    return dist;
}

std::pair<FrameSequence, FrameSequence> gen_video_pair(const SynthConfig& cfg, const PlayoutPattern& pattern,
                                                       Rng& rng) {
    auto ref = gen_reference(cfg, pattern.source_frame_count, rng);
    const std::uint64_t noise_seed = rng();
    auto dist = degrade(cfg, ref, pattern, noise_seed);
    return {std::move(ref), std::move(dist)};
}

double latent_quality(const SynthConfig& cfg, const PlayoutPattern& pattern, double complexity) {
    const auto [lo_it, hi_it] = std::minmax_element(cfg.ladder_kbps.begin(), cfg.ladder_kbps.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return 1.0;
    const double worst = cfg.max_complexity * std::log2(hi / lo);
    double loss = 0.0;
    const auto rates = pattern.frame_bitrates();
    for (double b : rates) loss += complexity * std::clamp(std::log2(hi / b), 0.0, std::log2(hi / lo));
    return std::clamp(1.0 - loss / (static_cast<double>(rates.size()) * worst), 0.0, 1.0);
}

double synth_mos_noiseless(const FeatureVector& f, const OracleCoefficients& a) {
    return a[0] * f.vqa - a[1] * f.r1 - a[2] * f.r2 + a[3] * f.m - a[4] * f.i - a[5] * f.r1 * (1.0 - f.m);
}

double synth_mos(const FeatureVector& f, const SynthConfig& cfg, Rng& rng) {
    const double g = synth_mos_noiseless(f, cfg.coefficients);
    if (!std::isfinite(g)) throw NumericError("synth: non-finite features");
    const double noise = cfg.mos_noise_sigma > 0.0 ? cfg.mos_noise_sigma * standard_normal(rng) : 0.0;
    return std::clamp(g + noise, cfg.mos_min, cfg.mos_max);
}

namespace {

std::string numbered(char prefix, std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%02zu", prefix, k + 1);
    return buf;
}

std::uint64_t noise_seed_for(const SynthConfig& cfg, std::size_t content) { return derive_seed(cfg.seed, {4, content}); }

}  // namespace

FrameSequence SynthData::distorted(const SynthSession& s) const {
    return degrade(cfg, references.at(s.content), patterns.at(s.pattern), noise_seed_for(cfg, s.content),
                   complexity.at(s.content));
}

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthData data;
    data.cfg = cfg;
    {
        Rng rng(derive_seed(cfg.seed, {0}));
        data.n_frames = uniform_int(rng, cfg.min_frames, cfg.max_frames);
    }
    for (int j = 0; j < cfg.n_patterns; ++j) {
        Rng rng(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(j)}));
        auto p = gen_pattern(cfg, data.n_frames, rng);
        p.pattern_id = numbered('p', static_cast<std::size_t>(j));
        data.patterns.push_back(std::move(p));
    }
    for (int i = 0; i < cfg.n_contents; ++i) {
        Rng rng(derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(i)}));
        data.references.push_back(gen_reference(cfg, data.n_frames, rng));
        Rng crng(derive_seed(cfg.seed, {5, static_cast<std::uint64_t>(i)}));
        data.complexity.push_back(uniform(crng, cfg.min_complexity, cfg.max_complexity));
    }
    for (std::size_t i = 0; i < data.references.size(); ++i)
        for (std::size_t j = 0; j < data.patterns.size(); ++j) {
            SynthSession s;
            s.content = i;
            s.pattern = j;
            s.content_id = numbered('c', i);
            s.pattern_id = data.patterns[j].pattern_id;
            s.latent = playout_features(data.patterns[j]);
            s.latent.vqa = latent_quality(cfg, data.patterns[j], data.complexity[i]);
            Rng rng(derive_seed(cfg.seed, {3, i, j}));
            s.mos = synth_mos(s.latent, cfg, rng);
            data.sessions.push_back(std::move(s));
        }
    return data;
}

namespace {

ManifestSession manifest_entry(const SynthSession& s) {
    ManifestSession e;
    e.content_id = s.content_id;
    e.pattern_id = s.pattern_id;
    e.pattern_file = fs::path("patterns") / (s.pattern_id + ".json");
    e.mos = s.mos;
    e.ref_video = fs::path("videos") / (s.content_id + "_ref.yuv");
    e.dist_video = fs::path("videos") / (s.content_id + "_" + s.pattern_id + ".yuv");
    return e;
}

}  // namespace

fs::path write_synth_dataset(const SynthData& data, const fs::path& dir) {
    fs::create_directories(dir / "patterns");
    fs::create_directories(dir / "videos");
    Manifest m;
    m.name = "synthetic";
    m.width = data.cfg.width;
    m.height = data.cfg.height;
    m.fps = data.cfg.fps;
    m.base_dir = dir;
    for (const auto& p : data.patterns) save_pattern(dir / "patterns" / (p.pattern_id + ".json"), p);
    for (std::size_t i = 0; i < data.references.size(); ++i)
        write_yuv(dir / "videos" / (numbered('c', i) + "_ref.yuv"), data.references[i]);
    for (const auto& s : data.sessions) {
        auto e = manifest_entry(s);
        write_yuv(dir / *e.dist_video, data.distorted(s));
        m.sessions.push_back(std::move(e));
    }
    const auto path = dir / "manifest.json";
    save_manifest(path, m);
    return path;
}

std::vector<ScoredSession> score_synth(const SynthData& data, MetricId metric, const MetricConfig& mcfg,
                                       unsigned threads) {
    std::vector<ScoredSession> out(data.sessions.size());
    parallel_for(data.sessions.size(), threads, [&](std::size_t k) {
        const auto& s = data.sessions[k];
        auto& o = out[k];
        o.entry = manifest_entry(s);
        o.pattern = data.patterns[s.pattern];
        o.alignment = build_alignment(o.pattern);
        o.series = score_sequence(data.references[s.content], data.distorted(s), o.alignment, metric, mcfg);
    });
    return out;
}

}  // namespace atlas
