#include "atlas/features.hpp"

#include "atlas/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace atlas {

std::string_view feature_name(FeatureId id) {
    switch (id) {
        case FeatureId::vqa: return "vqa";
        case FeatureId::r1: return "r1";
        case FeatureId::r2: return "r2";
        case FeatureId::m: return "m";
        case FeatureId::i: return "i";
    }
    return "unknown";
}

double feature_value(const FeatureVector& f, FeatureId id) {
    switch (id) {
        case FeatureId::vqa: return f.vqa;
        case FeatureId::r1: return f.r1;
        case FeatureId::r2: return f.r2;
        case FeatureId::m: return f.m;
        case FeatureId::i: return f.i;
    }
    return 0.0;
}

FeatureMask::FeatureMask(std::vector<FeatureId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    if (ids_.empty()) throw InvalidArgumentError("feature subset must not be empty");
}

FeatureMask FeatureMask::all() { return FeatureMask({kAllFeatures.begin(), kAllFeatures.end()}); }

FeatureMask FeatureMask::parse(std::string_view text) {
    std::vector<FeatureId> ids;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        auto token = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        if (!token.empty()) {
            bool found = false;
            for (auto id : kAllFeatures) {
                if (token == feature_name(id)) {
                    ids.push_back(id);
                    found = true;
                }
            }
            if (!found) throw InvalidArgumentError("unknown feature '" + std::string(token) + "'");
        }
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return FeatureMask(std::move(ids));
}

namespace {

using F = FeatureId;
const std::array<std::vector<FeatureId>, 12> kAblationSubsets = {{
    {F::vqa},
    {F::m},
    {F::i},
    {F::r1, F::r2},
    {F::vqa, F::m},
    {F::vqa, F::i},
    {F::vqa, F::m, F::r2},
    {F::m, F::r1, F::r2},
    {F::m, F::i, F::r1, F::r2},
    {F::vqa, F::i, F::r1, F::r2},
    {F::vqa, F::m, F::r1, F::r2},
    {F::vqa, F::m, F::i, F::r1, F::r2},
}};

}  // namespace

FeatureMask FeatureMask::ablation_subset(int index) {
    if (index < 1 || index > static_cast<int>(kAblationSubsets.size()))
        throw InvalidArgumentError("ablation subset index must be in [1, 12]");
    return FeatureMask(kAblationSubsets[static_cast<std::size_t>(index - 1)]);
}

bool FeatureMask::contains(FeatureId id) const { return std::find(ids_.begin(), ids_.end(), id) != ids_.end(); }

std::string FeatureMask::to_string() const {
    std::string out;
    for (auto id : ids_) {
        if (!out.empty()) out += ',';
        out += feature_name(id);
    }
    return out;
}

std::optional<int> FeatureMask::ablation_index() const {
    for (std::size_t k = 0; k < kAblationSubsets.size(); ++k)
        if (FeatureMask(kAblationSubsets[k]) == *this) return static_cast<int>(k + 1);
    return std::nullopt;
}

FeatureVector playout_features(const PlayoutPattern& pattern) {
    const double duration = displayed_duration(pattern);
    const auto stalls = pattern.stalls();
    const auto rates = pattern.frame_bitrates();
    const auto n = static_cast<std::int64_t>(rates.size());

    FeatureVector f;
    double stall_seconds = 0.0;
    for (const auto& s : stalls) stall_seconds += s.duration_s;
    f.r1 = stall_seconds / duration;
    f.r2 = static_cast<double>(stalls.size());

    std::int64_t below = 0;
    for (double r : rates) below += r < pattern.reference_bitrate_kbps ? 1 : 0;
    f.i = static_cast<double>(below) / pattern.fps / duration;

    // Trailing run of frames at the reference bitrate with no stall inside it.
    const std::int64_t last_stall = stalls.empty() ? -1 : stalls.back().at_src_frame;
    std::int64_t clean = 0;
    for (std::int64_t s = n - 1; s >= 0; --s) {
        if (rates[static_cast<std::size_t>(s)] < pattern.reference_bitrate_kbps) break;
        ++clean;
        if (s == last_stall) break;
    }
    f.m = static_cast<double>(clean) / pattern.fps / duration;
    return f;
}

FeatureVector extract_features(const QualityTimeSeries& ts, const PlayoutPattern& pattern,
                               const PoolingConfig& pooling) {
    const auto align_len = static_cast<std::size_t>(pattern.source_frame_count);
    std::size_t playing = 0;
    for (bool s : ts.stalled) playing += s ? 0 : 1;
    if (playing != 0 && playing != align_len)
        throw AlignmentError("series plays " + std::to_string(playing) + " frames, pattern has " +
                             std::to_string(align_len));
    auto f = playout_features(pattern);
    f.vqa = pool(ts, pooling, pattern.fps);
    return f;
}

double extract_m_stall(const PlayoutPattern& pattern) {
    const double duration = displayed_duration(pattern);
    const auto stalls = pattern.stalls();
    if (stalls.empty()) return 1.0;
    const auto after = pattern.source_frame_count - stalls.back().at_src_frame;
    return static_cast<double>(after) / pattern.fps / duration;
}

Eigen::MatrixXd feature_matrix(const std::vector<QoESample>& samples, const FeatureMask& mask) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(mask.size()));
    for (std::size_t r = 0; r < samples.size(); ++r)
        for (std::size_t c = 0; c < mask.size(); ++c)
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                feature_value(samples[r].features, mask.ids()[c]);
    return X;
}

Eigen::VectorXd mos_vector(const std::vector<QoESample>& samples) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t r = 0; r < samples.size(); ++r) y(static_cast<Eigen::Index>(r)) = samples[r].mos;
    return y;
}

Standardizer standardize_fit(const Eigen::MatrixXd& rows, StdConvention convention) {
    if (rows.rows() < 2) throw InvalidArgumentError("standardization needs at least two rows");
    Standardizer s;
    s.mean = rows.colwise().mean().transpose();
    const double denom = convention == StdConvention::population ? static_cast<double>(rows.rows())
                                                                  : static_cast<double>(rows.rows() - 1);
    s.scale.resize(rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        const double var = (rows.col(c).array() - s.mean(c)).square().sum() / denom;
        const double sd = std::sqrt(var);
        s.scale(c) = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != mean.size())
        throw SizeMismatchError("standardizer expects " + std::to_string(mean.size()) + " columns, got " +
                                std::to_string(rows.cols()));
    return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::MatrixXd standardize_apply(const Standardizer& s, const Eigen::MatrixXd& rows) { return s.apply(rows); }

nlohmann::json to_json(const Standardizer& s) {
    return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
            {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

Standardizer standardizer_from_json(const nlohmann::json& j) {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto scale = j.at("scale").get<std::vector<double>>();
    if (mean.size() != scale.size()) throw ParseError("standardizer mean/scale lengths differ");
    Standardizer s;
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    s.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    return s;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw ParseError(where);
        return v;
    } catch (const std::logic_error&) {
        throw ParseError(where + ": non-numeric value '" + cell + "'");
    }
}

}  // namespace

void write_feature_csv(const std::filesystem::path& path, const std::vector<QoESample>& samples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "content_id,pattern_id,vqa,r1,r2,m,i,mos\n";
    for (const auto& s : samples) {
        const auto& f = s.features;
        out << s.content_id << ',' << s.pattern_id << ',' << format_double(f.vqa) << ',' << format_double(f.r1) << ','
            << format_double(f.r2) << ',' << format_double(f.m) << ',' << format_double(f.i) << ','
            << format_double(s.mos) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<QoESample> read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    const auto header = split_csv(line);
    const std::vector<std::string> expected = {"content_id", "pattern_id", "vqa", "r1", "r2", "m", "i", "mos"};
    const bool with_m_stall = header.size() == expected.size() + 1 && header.back() == "m_stall";
    if (!std::equal(expected.begin(), expected.end(), header.begin(), header.begin() + std::min(header.size(), expected.size())) ||
        (header.size() != expected.size() && !with_m_stall))
        throw ParseError(path.string() + ": unexpected header '" + line + "'");

    std::vector<QoESample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        const auto where = path.string() + ":" + std::to_string(line_no);
        if (cells.size() != header.size()) throw ParseError(where + ": wrong column count");
        QoESample s;
        s.content_id = cells[0];
        s.pattern_id = cells[1];
        s.features.vqa = parse_cell(cells[2], where);
        s.features.r1 = parse_cell(cells[3], where);
        s.features.r2 = parse_cell(cells[4], where);
        s.features.m = parse_cell(cells[5], where);
        s.features.i = parse_cell(cells[6], where);
        s.mos = parse_cell(cells[7], where);
        if (with_m_stall) s.m_stall = parse_cell(cells[8], where);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace atlas
