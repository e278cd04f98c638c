#include "atlas/dataset.hpp"
#include "atlas/error.hpp"
#include "atlas/synth.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace atlas;
using testing_helpers::scratch_dir;

namespace {

SynthConfig tiny_config() {
    SynthConfig cfg;
    cfg.n_contents = 3;
    cfg.n_patterns = 2;
    cfg.width = 32;
    cfg.height = 32;
    cfg.min_frames = 20;
    cfg.max_frames = 30;
    cfg.min_stall_s = 0.4;
    cfg.max_stall_s = 1.0;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("manifest round trip and validation") {
    const auto dir = scratch_dir("manifest");
    const auto data = generate(tiny_config());
    const auto path = write_synth_dataset(data, dir);
    const auto m = load_manifest(path);
    CHECK(m.sessions.size() == 6);
    CHECK(m.width == 32);
    CHECK(to_json(m) == to_json(load_manifest(path)));

    auto j = to_json(m);
    j["format_version"] = 99;
    CHECK_THROWS_AS(manifest_from_json(j, dir), FormatVersionError);

    Manifest dup = m;
    dup.sessions.push_back(dup.sessions[0]);
    CHECK_THROWS(dup.validate());
    Manifest odd = m;
    odd.width = 33;
    CHECK_THROWS_AS(odd.validate(), DimensionError);
}

TEST_CASE("scoring a manifest") {
    const auto dir = scratch_dir("scoring");
    const auto data = generate(tiny_config());
    const auto path = write_synth_dataset(data, dir);
    const auto m = load_manifest(path);

    ScoringOptions opts;
    opts.metric = MetricId::psnr;
    const auto scored = score_manifest(m, opts);
    REQUIRE(scored.size() == 6);
    for (const auto& s : scored) CHECK(s.series.size() == s.alignment.size());

    // Native scoring on disk matches the in-memory path.
    const auto mem = score_synth(data, MetricId::psnr, {});
    for (std::size_t k = 0; k < 6; ++k) CHECK(mem[k].series.values.size() == scored[k].series.values.size());

    const auto ds = build_dataset("synthetic", scored, PoolingConfig{});
    CHECK(ds.samples.size() == 6);
    CHECK(ds.samples[0].m_stall.has_value());

    write_feature_csv(dir / "a.csv", ds.samples);
    opts.threads = 3;
    write_feature_csv(dir / "b.csv", build_dataset("synthetic", score_manifest(m, opts), PoolingConfig{}, 2).samples);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(read_feature_csv(dir / "a.csv").size() == 6);

    CHECK(baseline_sessions(scored).size() == 6);
}

TEST_CASE("missing inputs name the session") {
    const auto dir = scratch_dir("missing");
    const auto data = generate(tiny_config());
    const auto path = write_synth_dataset(data, dir);
    auto m = load_manifest(path);
    std::filesystem::remove(m.resolve(*m.sessions[3].dist_video));
    ScoringOptions opts;
    opts.metric = MetricId::ssim;
    try {
        score_manifest(m, opts);
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(m.sessions[3].label()) != std::string::npos);
    }
}

TEST_CASE("external score CSVs") {
    const auto dir = scratch_dir("csvmode");
    auto pattern = testing_helpers::simple_pattern(20, 5);
    save_pattern(dir / "p.json", pattern);
    {
        std::ofstream out(dir / "s.csv");
        out << "displayed_frame_index,score\n";
        for (int k = 0; k < 20; ++k) out << k << "," << 0.5 + 0.01 * k << "\n";
    }
    Manifest m;
    m.name = "ext";
    m.width = 16;
    m.height = 16;
    m.fps = 5;
    m.base_dir = dir;
    ManifestSession s;
    s.content_id = "c";
    s.pattern_id = "p";
    s.pattern_file = "p.json";
    s.mos = 3;
    s.scores_csv = "s.csv";
    m.sessions.push_back(s);
    const auto scored = score_manifest(m, {});
    REQUIRE(scored.size() == 1);
    CHECK(scored[0].series.values[19] == doctest::Approx(0.69));
}

TEST_CASE("ms-ssim scale fitting") {
    CHECK(fitting_msssim_scales(64, 64) == 3);
    CHECK(fitting_msssim_scales(176, 144) == 4);
    CHECK(fitting_msssim_scales(1920, 1080) == 5);
    CHECK(fitting_msssim_scales(1920, 1080, 2) == 2);
}
