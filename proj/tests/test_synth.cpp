#include "atlas/error.hpp"
#include "atlas/eval.hpp"
#include "atlas/features.hpp"
#include "atlas/metrics.hpp"
#include "atlas/synth.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace atlas;

TEST_CASE("generated patterns") {
    SynthConfig cfg;
    SUBCASE("no stalls allowed") {
        cfg.min_stalls = cfg.max_stalls = 0;
        for (int k = 0; k < 50; ++k) {
            Rng rng(derive_seed(3, {static_cast<std::uint64_t>(k)}));
            CHECK(playout_features(gen_pattern(cfg, rng)).r2 == 0.0);
        }
    }
    SUBCASE("seeded calls repeat") {
        Rng a(11), b(11);
        CHECK(gen_pattern(cfg, a) == gen_pattern(cfg, b));
    }
    SUBCASE("property sweep") {
        Rng rng(12);
        int with_stalls = 0, with_switches = 0;
        for (int k = 0; k < 1000; ++k) {
            const auto p = gen_pattern(cfg, rng);
            CHECK_NOTHROW(p.validate());
            CHECK(p.source_frame_count >= cfg.min_frames);
            CHECK(p.source_frame_count <= cfg.max_frames);
            const auto stalls = p.stalls();
            CHECK(static_cast<int>(stalls.size()) <= cfg.max_stalls);
            for (const auto& s : stalls) {
                CHECK(s.duration_s >= cfg.min_stall_s - 1e-9);
                CHECK(s.duration_s <= cfg.max_stall_s + 1e-9);
                CHECK(s.at_src_frame < p.source_frame_count);
            }
            with_stalls += !stalls.empty();
            with_switches += p.plays().size() > 1;
        }
        CHECK(with_stalls > 100);
        CHECK(with_switches > 100);
    }
    SUBCASE("invalid configuration") {
        cfg.min_stalls = 4;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    }
}

TEST_CASE("rendered videos") {
    SynthConfig cfg;
    Rng rng(20);
    const auto ref = gen_reference(cfg, 30, rng);
    CHECK(ref.frames.size() == 30);
    CHECK(ref.width == 64);

    auto top = testing_helpers::simple_pattern(30, cfg.fps, 2000, 2000);
    auto low = testing_helpers::simple_pattern(30, cfg.fps, 250, 2000);
    const auto d_top = degrade(cfg, ref, top, 99);
    const auto d_low = degrade(cfg, ref, low, 99);
    const auto align = build_alignment(top);
    const auto q_top = score_sequence(ref, d_top, align, MetricId::psnr);
    const auto q_low = score_sequence(ref, d_low, align, MetricId::psnr);
    for (std::size_t k = 0; k < q_top.size(); ++k) CHECK(q_top.values[k] >= q_low.values[k]);
    CHECK(degrade(cfg, ref, low, 99).frames == d_low.frames);

    PlayoutPattern stalled = top;
    stalled.events = {PlayEvent{0, 9, 1000}, StallEvent{10, 1.0}, PlayEvent{10, 29, 500}};
    const auto d_stall = degrade(cfg, ref, stalled, 5);
    CHECK(d_stall.frames.size() == build_alignment(stalled).size());
    CHECK(d_stall.frames[10] == d_stall.frames[9]);
}

TEST_CASE("oracle mos") {
    SynthConfig cfg;
    const FeatureVector best{1, 0, 0, 1, 0};
    CHECK(synth_mos_noiseless(best, cfg.coefficients) == doctest::Approx(52.0));
    cfg.mos_noise_sigma = 0;
    Rng rng(1);
    CHECK(synth_mos(best, cfg, rng) == doctest::Approx(52.0));

    double prev = 1e9;
    for (double r1 = 0; r1 <= 1.0; r1 += 0.1) {
        const double v = synth_mos_noiseless(FeatureVector{0.6, r1, 0.3, 0.2, 0.3}, cfg.coefficients);
        CHECK(v <= prev);
        prev = v;
    }

    SynthConfig noisy;
    Rng a(8), b(8);
    CHECK(synth_mos(best, noisy, a) == synth_mos(best, noisy, b));
}

TEST_CASE("generate is deterministic") {
    SynthConfig cfg;
    cfg.n_contents = 3;
    cfg.n_patterns = 2;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    REQUIRE(a.sessions.size() == 6);
    CHECK(a.patterns == b.patterns);
    for (std::size_t k = 0; k < a.sessions.size(); ++k) {
        CHECK(a.sessions[k].mos == b.sessions[k].mos);
        CHECK(a.distorted(a.sessions[k]).frames == b.distorted(b.sessions[k]).frames);
    }
    CHECK(a.sessions[0].content_id == "c01");
    CHECK(a.sessions[1].pattern_id == "p02");

    SynthConfig other = cfg;
    other.seed = 2;
    CHECK(generate(other).sessions[0].mos != a.sessions[0].mos);

    const auto back = synth_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("noiseless linear oracle is recovered by ridge") {
    SynthConfig cfg;
    cfg.mos_noise_sigma = 0.0;
    cfg.coefficients[5] = 0.0;
    const auto data = generate(cfg);
    // Feed the oracle's own feature vectors, i.e. a perfect quality measurement.
    Dataset ds;
    ds.name = "latent";
    for (const auto& s : data.sessions) {
        QoESample q;
        q.content_id = s.content_id;
        q.pattern_id = s.pattern_id;
        q.features = s.latent;
        q.mos = s.mos;
        ds.samples.push_back(q);
    }
    ExperimentConfig ec;
    ec.regressor = RegressorKind::ridge;
    HyperParams hp;
    hp.lambda = 1e-8;
    ec.grid = {hp};
    ec.compute_lcc = false;
    const auto splits = gen_content_splits(ds.content_ids(), 0.8, 50, 4);
    const auto rep = run_experiment1(ds, splits, ec);
    CHECK(rep.n_failed == 0);
    CHECK(*rep.median_srocc == doctest::Approx(1.0));
}
