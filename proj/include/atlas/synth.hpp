#pragma once

#include "atlas/dataset.hpp"
#include "atlas/features.hpp"
#include "atlas/random.hpp"
#include "atlas/video_io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace atlas {

/// Fixture oracle coefficients for
/// g = a0*vqa - a1*r1 - a2*r2 + a3*m - a4*i - a5*r1*(1 - m).
using OracleCoefficients = std::array<double, 6>;

struct SynthConfig {
    int n_contents = 10;
    int n_patterns = 6;
    int width = 64;
    int height = 64;
    double fps = 5.0;
    std::int64_t min_frames = 60;
    std::int64_t max_frames = 120;
    int min_stalls = 0;
    int max_stalls = 3;
    double min_stall_s = 2.0;
    double max_stall_s = 8.0;
    int max_segments = 4;
    std::vector<double> ladder_kbps = {250, 500, 1000, 2000};
    /// Pixel noise std per halving of bitrate below the top rung.
    double noise_per_octave = 6.0;
    /// Per-content coding difficulty; scales both pixel noise and latent quality loss.
    double min_complexity = 0.5;
    double max_complexity = 1.5;
    double mos_noise_sigma = 3.0;
    double mos_min = -100.0;
    double mos_max = 100.0;
    OracleCoefficients coefficients = {40, 18, 4, 12, 8, 10};
    std::uint64_t seed = 1;

    void validate() const;
    double reference_kbps() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);

PlayoutPattern gen_pattern(const SynthConfig& cfg, std::int64_t n_frames, Rng& rng);
/// Draws the frame count from [min_frames, max_frames] first.
PlayoutPattern gen_pattern(const SynthConfig& cfg, Rng& rng);

FrameSequence gen_reference(const SynthConfig& cfg, std::int64_t n_frames, Rng& rng);

/// Per-source-frame noise is derived from `noise_seed`, so the same seed at a
/// higher bitrate never moves a pixel further from the reference.
FrameSequence degrade(const SynthConfig& cfg, const FrameSequence& ref, const PlayoutPattern& pattern,
                      std::uint64_t noise_seed, double complexity = 1.0);

std::pair<FrameSequence, FrameSequence> gen_video_pair(const SynthConfig& cfg, const PlayoutPattern& pattern,
                                                       Rng& rng);

/// Latent per-session quality in [0, 1]: one minus the mean over source
/// frames of the octave deficit below the top rung, scaled by complexity and
/// normalized by the worst case (max_complexity at the bottom rung).
double latent_quality(const SynthConfig& cfg, const PlayoutPattern& pattern, double complexity);

/// Oracle MOS; f.vqa is the normalized quality in [0, 1].
double synth_mos_noiseless(const FeatureVector& f, const OracleCoefficients& a);
double synth_mos(const FeatureVector& f, const SynthConfig& cfg, Rng& rng);

struct SynthSession {
    std::size_t content = 0;
    std::size_t pattern = 0;
    std::string content_id;
    std::string pattern_id;
    FeatureVector latent;
    double mos = 0.0;
};

/// Everything but the distorted videos, which are rendered on demand.
struct SynthData {
    SynthConfig cfg;
    std::int64_t n_frames = 0;
    std::vector<PlayoutPattern> patterns;
    std::vector<FrameSequence> references;
    std::vector<double> complexity;  // per content
    std::vector<SynthSession> sessions;

    FrameSequence distorted(const SynthSession& s) const;
};

SynthData generate(const SynthConfig& cfg);

/// Writes manifest.json, patterns/ and videos/ under `dir`; returns the manifest path.
std::filesystem::path write_synth_dataset(const SynthData& data, const std::filesystem::path& dir);

/// Score the in-memory data with a native metric without touching disk.
std::vector<ScoredSession> score_synth(const SynthData& data, MetricId metric, const MetricConfig& mcfg,
                                       unsigned threads = 1);

}  // namespace atlas
