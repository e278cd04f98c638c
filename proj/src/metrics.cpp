#include "atlas/metrics.hpp"

#include "atlas/parallel.hpp"

#include <charconv>
#include <fstream>
#include <optional>

namespace atlas {

std::string_view metric_name(MetricId id) {
    switch (id) {
        case MetricId::psnr: return "psnr";
        case MetricId::ssim: return "ssim";
        case MetricId::msssim: return "msssim";
        case MetricId::gmsd: return "gmsd";
    }
    return "unknown";
}

MetricId parse_metric(std::string_view name) {
    if (name == "psnr") return MetricId::psnr;
    if (name == "ssim") return MetricId::ssim;
    if (name == "msssim" || name == "ms-ssim") return MetricId::msssim;
    if (name == "gmsd") return MetricId::gmsd;
    throw InvalidArgumentError("unknown metric '" + std::string(name) + "'");
}

bool metric_higher_is_better(MetricId id) { return id != MetricId::gmsd; }

double score_frame(MetricId id, const LumaPlane& ref, const LumaPlane& dist, const MetricConfig& cfg) {
    switch (id) {
        case MetricId::psnr: return psnr<double>(ref, dist, cfg.psnr_cap_db);
        case MetricId::ssim: return ssim<double>(ref, dist);
        case MetricId::msssim: return msssim<double>(ref, dist, cfg.msssim_scales);
        case MetricId::gmsd: return gmsd<double>(ref, dist, cfg.gmsd_c);
    }
    throw InvalidArgumentError("unknown metric");
}

std::vector<double> QualityTimeSeries::playing_values() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t d = 0; d < values.size(); ++d)
        if (!stalled[d]) out.push_back(values[d]);
    return out;
}

void QualityTimeSeries::validate() const {
    if (values.size() != stalled.size()) throw SizeMismatchError("values and stall mask lengths differ");
    for (std::size_t d = 0; d < values.size(); ++d)
        if (!stalled[d] && !std::isfinite(values[d]))
            throw NumericError("non-finite score on playing frame " + std::to_string(d));
}

QualityTimeSeries score_sequence(const FrameSequence& ref, const FrameSequence& dist, const FrameAlignment& align,
                                 MetricId metric, const MetricConfig& cfg, unsigned threads) {
    if (dist.size() != align.size())
        throw AlignmentError("distorted sequence has " + std::to_string(dist.size()) + " frames, alignment has " +
                             std::to_string(align.size()));
    if (ref.size() != align.playing_count())
        throw AlignmentError("reference has " + std::to_string(ref.size()) + " frames, alignment plays " +
                             std::to_string(align.playing_count()));
    if (ref.width != dist.width || ref.height != dist.height)
        throw DimensionError("reference and distorted sequences differ in frame size");

    QualityTimeSeries ts;
    ts.metric_name = std::string(metric_name(metric));
    ts.higher_is_better = metric_higher_is_better(metric);
    ts.values.assign(align.size(), std::numeric_limits<double>::quiet_NaN());
    ts.stalled = align.stall_mask();
    parallel_for(align.size(), threads, [&](std::size_t d) {
        const auto& e = align.entries[d];
        if (e.stalled) return;
        ts.values[d] = score_frame(metric, ref.frames[static_cast<std::size_t>(e.source_index)], dist.frames[d], cfg);
    });
    return ts;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    s = trim(s);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

}  // namespace

QualityTimeSeries ingest_scores(const std::filesystem::path& path, const FrameAlignment& align,
                                std::string metric_name, bool higher_is_better, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    QualityTimeSeries ts;
    ts.metric_name = std::move(metric_name);
    ts.higher_is_better = higher_is_better;
    ts.values.assign(align.size(), std::numeric_limits<double>::quiet_NaN());
    ts.stalled = align.stall_mask();
    std::vector<bool> seen(align.size(), false);

    std::string line;
    if (!std::getline(in, line) || trim(line) != "displayed_frame_index,score")
        throw ParseError(path.string() + ": expected header 'displayed_frame_index,score'");
    std::size_t line_no = 1;
    std::size_t ignored = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        const auto where = path.string() + ":" + std::to_string(line_no);
        if (comma == std::string_view::npos) throw ParseError(where + ": expected two columns");
        const auto index = parse_number<long long>(row.substr(0, comma));
        const auto score = parse_number<double>(row.substr(comma + 1));
        if (!index) throw ParseError(where + ": bad frame index");
        if (!score || !std::isfinite(*score)) throw ParseError(where + ": non-numeric score");
        if (*index < 0 || static_cast<std::size_t>(*index) >= align.size())
            throw ParseError(where + ": frame index " + std::to_string(*index) + " outside the displayed range");
        const auto d = static_cast<std::size_t>(*index);
        if (seen[d]) throw ParseError(where + ": duplicate frame index " + std::to_string(d));
        seen[d] = true;
        if (ts.stalled[d]) {
            ++ignored;
            continue;
        }
        ts.values[d] = *score;
    }
    for (std::size_t d = 0; d < align.size(); ++d)
        if (!ts.stalled[d] && !seen[d])
            throw MissingFrameError(path.string() + ": no score for displayed frame " + std::to_string(d));
    if (ignored > 0 && warnings)
        warnings->push_back(path.string() + ": ignored " + std::to_string(ignored) + " score(s) on stalled frames");
    return ts;
}

}  // namespace atlas
