#pragma once

#include "atlas/metrics.hpp"
#include "atlas/pooling.hpp"
#include "atlas/video_io.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace atlas {

/// The five session features: pooled quality, rebuffering time fraction,
/// rebuffering count, memory (trailing clean playback) and impairment time.
struct FeatureVector {
    double vqa = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double m = 0.0;
    double i = 0.0;

    bool operator==(const FeatureVector&) const = default;
};

enum class FeatureId { vqa = 0, r1 = 1, r2 = 2, m = 3, i = 4 };
inline constexpr std::array<FeatureId, 5> kAllFeatures = {FeatureId::vqa, FeatureId::r1, FeatureId::r2, FeatureId::m,
                                                         FeatureId::i};

std::string_view feature_name(FeatureId id);
double feature_value(const FeatureVector& f, FeatureId id);

/// A non-empty feature subset, kept in canonical column order.
class FeatureMask {
public:
    FeatureMask() = default;
    explicit FeatureMask(std::vector<FeatureId> ids);

    static FeatureMask all();
    /// Parses a comma-separated list such as "vqa,m,i,r1,r2".
    static FeatureMask parse(std::string_view text);
    /// Numbered subsets 1..12 of the ablation study (e.g. 5 = vqa+m).
    static FeatureMask ablation_subset(int index);

    const std::vector<FeatureId>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    bool contains(FeatureId id) const;
    std::string to_string() const;
    /// Ablation index of this subset, if it is one of the twelve.
    std::optional<int> ablation_index() const;

    bool operator==(const FeatureMask&) const = default;

private:
    std::vector<FeatureId> ids_;
};

struct QoESample {
    std::string content_id;
    std::string pattern_id;
    FeatureVector features;
    double mos = 0.0;
    /// Stall-only memory feature; present when the playout pattern was available.
    std::optional<double> m_stall;
};

FeatureVector extract_features(const QualityTimeSeries& ts, const PlayoutPattern& pattern,
                               const PoolingConfig& pooling);

/// Rebuffering, memory and impairment features only (vqa left at 0).
FeatureVector playout_features(const PlayoutPattern& pattern);

/// Trailing playback after the last stall, as a fraction of displayed time.
double extract_m_stall(const PlayoutPattern& pattern);

/// Rows of `samples` projected onto `mask`.
Eigen::MatrixXd feature_matrix(const std::vector<QoESample>& samples, const FeatureMask& mask);
Eigen::VectorXd mos_vector(const std::vector<QoESample>& samples);

enum class StdConvention { population, sample };

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
    bool operator==(const Standardizer&) const = default;
};

Standardizer standardize_fit(const Eigen::MatrixXd& rows, StdConvention convention = StdConvention::population);
Eigen::MatrixXd standardize_apply(const Standardizer& s, const Eigen::MatrixXd& rows);

nlohmann::json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const nlohmann::json& j);

/// Feature table CSV: content_id,pattern_id,vqa,r1,r2,m,i,mos
void write_feature_csv(const std::filesystem::path& path, const std::vector<QoESample>& samples);
std::vector<QoESample> read_feature_csv(const std::filesystem::path& path);

}  // namespace atlas
