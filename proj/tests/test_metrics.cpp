#include "atlas/error.hpp"
#include "atlas/metrics.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

using namespace atlas;
using testing_helpers::random_plane;
using testing_helpers::scratch_dir;
using testing_helpers::simple_pattern;

namespace {

LumaPlane checker(int rows, int cols, int cell) {
    LumaPlane p(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) p(r, c) = ((r / cell + c / cell) % 2) ? 220 : 30;
    return p;
}

LumaPlane box_blur(const LumaPlane& in) {
    LumaPlane out = in;
    for (int r = 1; r + 1 < in.rows(); ++r)
        for (int c = 1; c + 1 < in.cols(); ++c) {
            int s = 0;
            for (int i = -1; i <= 1; ++i)
                for (int j = -1; j <= 1; ++j) s += in(r + i, c + j);
            out(r, c) = static_cast<std::uint8_t>(s / 9);
        }
    return out;
}

}  // namespace

TEST_CASE("psnr examples") {
    const LumaPlane zero = LumaPlane::Zero(16, 16);
    CHECK(psnr(zero, zero) == 100.0);
    CHECK(psnr(zero, LumaPlane::Constant(16, 16, 255)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(psnr(zero, LumaPlane::Constant(16, 16, 1)) == doctest::Approx(20 * std::log10(255.0)).epsilon(1e-12));
    CHECK(psnr(zero, LumaPlane::Constant(16, 16, 1)) == doctest::Approx(48.1308).epsilon(1e-6));
    CHECK_THROWS_AS(psnr(zero, LumaPlane::Zero(16, 18)), DimensionError);
}

TEST_CASE("psnr decreases with MSE") {
    const LumaPlane ref = LumaPlane::Constant(16, 16, 100);
    double last = 101;
    for (int k = 1; k < 50; ++k) {
        const double v = psnr(ref, LumaPlane::Constant(16, 16, static_cast<std::uint8_t>(100 + k)));
        CHECK(v < last);
        last = v;
    }
}

TEST_CASE("ssim matches the windowed formula on fixed pairs") {
    const LumaPlane a = checker(64, 64, 8);
    const LumaPlane b = box_blur(a);
    const auto ref = oracle::ssim(oracle::to_image(a), oracle::to_image(b));
    CHECK(ssim(a, b) == doctest::Approx(ref.ssim).epsilon(1e-9));
    CHECK(ssim_contrast_structure(a, b) == doctest::Approx(ref.cs).epsilon(1e-9));
    CHECK(std::abs(ssim(a, b) - ref.ssim) < 1e-6);
}

TEST_CASE("ssim identities") {
    std::mt19937_64 rng(5);
    const LumaPlane a = random_plane(32, 40, rng), b = random_plane(32, 40, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK_THROWS_AS(ssim(LumaPlane::Zero(10, 20), LumaPlane::Zero(10, 20)), DimensionError);
}

TEST_CASE("ssim contrast-structure term is shift invariant") {
    // The full index is not: its luminance factor depends on absolute means.
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> d(20, 200);
    LumaPlane a(32, 32), b(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            a(r, c) = static_cast<std::uint8_t>(d(rng));
            b(r, c) = static_cast<std::uint8_t>(d(rng));
        }
    const LumaPlane a2 = (a.cast<int>().array() + 40).cast<std::uint8_t>();
    const LumaPlane b2 = (b.cast<int>().array() + 40).cast<std::uint8_t>();
    CHECK(ssim_contrast_structure(a, b) == doctest::Approx(ssim_contrast_structure(a2, b2)).epsilon(1e-9));
}

TEST_CASE("ms-ssim") {
    std::mt19937_64 rng(11);
    const LumaPlane a = checker(144, 176, 12);
    LumaPlane b = box_blur(a);
    std::uniform_int_distribution<int> noise(-10, 10);
    for (int r = 0; r < b.rows(); ++r)
        for (int c = 0; c < b.cols(); ++c) b(r, c) = static_cast<std::uint8_t>(std::clamp(b(r, c) + noise(rng), 0, 255));

    SUBCASE("176x144 pair with four scales matches the recursion") {
        const double ref = oracle::msssim(oracle::to_image(a), oracle::to_image(b), 4);
        CHECK(std::abs(msssim(a, b, 4) - ref) < 1e-6);
    }
    SUBCASE("five scales need 176 pixels on the short side") {
        CHECK_THROWS_AS(msssim(a, b, 5), DimensionError);
    }
    SUBCASE("single scale reduces to ssim") {
        CHECK(msssim(a, b, 1) == doctest::Approx(ssim(a, b)).epsilon(1e-12));
    }
    SUBCASE("identity") {
        CHECK(msssim(a, a, 4) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gmsd") {
    std::mt19937_64 rng(13);
    const LumaPlane a = random_plane(32, 32, rng), b = random_plane(32, 32, rng);
    CHECK(gmsd(a, a) == doctest::Approx(0.0));
    CHECK(std::abs(gmsd(a, a)) < 1e-9);
    CHECK(gmsd(a, b) == doctest::Approx(gmsd(b, a)).epsilon(1e-12));
    const LumaPlane c = checker(48, 64, 6);
    const LumaPlane d = box_blur(c);
    CHECK(std::abs(gmsd(c, d) - oracle::gmsd(oracle::to_image(c), oracle::to_image(d))) < 1e-9);
}

TEST_CASE("score_sequence pairs frames through the alignment") {
    FrameSequence ref{16, 16, 1.0, {}};
    FrameSequence dist{16, 16, 1.0, {}};
    // Per-frame MSE 0, 1, 4.
    for (int k = 0; k < 3; ++k) {
        ref.frames.push_back(LumaPlane::Constant(16, 16, 50));
        dist.frames.push_back(LumaPlane::Constant(16, 16, static_cast<std::uint8_t>(50 + k)));
    }
    auto ts = score_sequence(ref, dist, build_alignment(simple_pattern(3, 1.0)), MetricId::psnr);
    REQUIRE(ts.size() == 3);
    CHECK(ts.values[0] == 100.0);
    CHECK(ts.values[1] == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(ts.values[2] == doctest::Approx(42.1102).epsilon(1e-5));

    PlayoutPattern p = simple_pattern(3, 1.0);
    p.events = {PlayEvent{0, 0, 1000}, StallEvent{1, 2.0}, PlayEvent{1, 2, 1000}};
    const auto align = build_alignment(p);
    FrameSequence shown{16, 16, 1.0, {}};
    for (const auto& e : align.entries) shown.frames.push_back(dist.frames[static_cast<std::size_t>(e.source_index)]);
    ts = score_sequence(ref, shown, align, MetricId::psnr);
    REQUIRE(ts.size() == 5);
    CHECK(ts.stalled == align.stall_mask());
    CHECK(std::isnan(ts.values[1]));
    CHECK(std::isnan(ts.values[2]));
    CHECK(ts.values[3] == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(ts.playing_values().size() == 3);

    FrameSequence short_dist = shown;
    short_dist.frames.pop_back();
    CHECK_THROWS(score_sequence(ref, short_dist, align, MetricId::psnr));
}

TEST_CASE("score_sequence is thread-count independent") {
    std::mt19937_64 rng(21);
    FrameSequence ref{32, 32, 5.0, {}}, dist{32, 32, 5.0, {}};
    for (int k = 0; k < 12; ++k) {
        ref.frames.push_back(random_plane(32, 32, rng));
        dist.frames.push_back(random_plane(32, 32, rng));
    }
    const auto align = build_alignment(simple_pattern(12, 5.0));
    const auto one = score_sequence(ref, dist, align, MetricId::ssim, {}, 1);
    const auto four = score_sequence(ref, dist, align, MetricId::ssim, {}, 4);
    CHECK(one.values == four.values);
}

TEST_CASE("ingest_scores") {
    const auto dir = scratch_dir("ingest");
    const auto align = build_alignment(simple_pattern(10, 1.0));
    {
        std::ofstream out(dir / "ok.csv");
        out << "displayed_frame_index,score\n";
        for (int k = 0; k < 10; ++k) out << k << ',' << 0.5 + k * 0.01 << '\n';
    }
    auto ts = ingest_scores(dir / "ok.csv", align, "vmaf");
    CHECK(ts.size() == 10);
    CHECK(ts.values[3] == doctest::Approx(0.53));

    {
        std::ofstream out(dir / "missing.csv");
        out << "displayed_frame_index,score\n";
        for (int k = 0; k < 10; ++k)
            if (k != 7) out << k << ",1\n";
    }
    CHECK_THROWS_AS(ingest_scores(dir / "missing.csv", align), MissingFrameError);

    {
        std::ofstream out(dir / "dup.csv");
        out << "displayed_frame_index,score\n0,1\n0,2\n";
    }
    CHECK_THROWS_AS(ingest_scores(dir / "dup.csv", align), ParseError);
    {
        std::ofstream out(dir / "nan.csv");
        out << "displayed_frame_index,score\n0,abc\n";
    }
    CHECK_THROWS_AS(ingest_scores(dir / "nan.csv", align), ParseError);

    PlayoutPattern p = simple_pattern(4, 1.0);
    p.events = {PlayEvent{0, 1, 1000}, StallEvent{2, 2.0}, PlayEvent{2, 3, 1000}};
    const auto stall_align = build_alignment(p);
    {
        std::ofstream out(dir / "stalled.csv");
        out << "displayed_frame_index,score\n";
        for (int k = 0; k < 6; ++k) out << k << ",1\n";
    }
    std::vector<std::string> warnings;
    ts = ingest_scores(dir / "stalled.csv", stall_align, "csv", true, &warnings);
    CHECK_FALSE(warnings.empty());
    CHECK(std::isnan(ts.values[2]));
    CHECK(ts.playing_values().size() == 4);
}
