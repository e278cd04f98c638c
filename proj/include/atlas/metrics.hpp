#pragma once

// Full-reference per-frame quality kernels on 8-bit luma.
//
// The kernels are templates over the working scalar and accept any Eigen
// dense expression as input (uint8 planes, double arrays, blocks, ...).
// Inputs are interpreted on the [0, 255] sample scale.

#include "atlas/error.hpp"
#include "atlas/video_io.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace atlas {

template <typename Scalar>
using PlaneArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class MetricId { psnr, ssim, msssim, gmsd };

std::string_view metric_name(MetricId id);
MetricId parse_metric(std::string_view name);
/// GMSD is a distortion score; the others grow with quality.
bool metric_higher_is_better(MetricId id);

struct MetricConfig {
    double psnr_cap_db = 100.0;
    int msssim_scales = 5;
    double gmsd_c = 170.0;
};

namespace detail {

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("frame dimensions differ: " + std::to_string(a.cols()) + "x" + std::to_string(a.rows()) +
                             " vs " + std::to_string(b.cols()) + "x" + std::to_string(b.rows()));
}

/// Normalized 1-D Gaussian taps.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> gaussian_taps(int size, Scalar sigma) {
    Eigen::Array<Scalar, Eigen::Dynamic, 1> taps(size);
    const Scalar centre = static_cast<Scalar>(size - 1) / 2;
    for (int i = 0; i < size; ++i) {
        const Scalar d = static_cast<Scalar>(i) - centre;
        taps(i) = std::exp(-d * d / (2 * sigma * sigma));
    }
    return taps / taps.sum();
}

/// Separable correlation keeping only fully covered positions.
template <typename Scalar>
PlaneArray<Scalar> filter_valid(const PlaneArray<Scalar>& img, const Eigen::Array<Scalar, Eigen::Dynamic, 1>& taps) {
    const Eigen::Index k = taps.size();
    const Eigen::Index out_rows = img.rows() - k + 1;
    const Eigen::Index out_cols = img.cols() - k + 1;
    PlaneArray<Scalar> horizontal = PlaneArray<Scalar>::Zero(img.rows(), out_cols);
    for (Eigen::Index j = 0; j < k; ++j) horizontal += taps(j) * img.middleCols(j, out_cols);
    PlaneArray<Scalar> out = PlaneArray<Scalar>::Zero(out_rows, out_cols);
    for (Eigen::Index i = 0; i < k; ++i) out += taps(i) * horizontal.middleRows(i, out_rows);
    return out;
}

/// 2x2 block mean; a trailing odd row/column is dropped.
template <typename Scalar>
PlaneArray<Scalar> downsample2(const PlaneArray<Scalar>& img) {
    const Eigen::Index rows = img.rows() / 2;
    const Eigen::Index cols = img.cols() / 2;
    PlaneArray<Scalar> out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            out(r, c) = (img(2 * r, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c) + img(2 * r + 1, 2 * c + 1)) /
                        Scalar(4);
    return out;
}

template <typename Scalar>
struct SsimStats {
    Scalar ssim;  // mean of luminance x contrast-structure map
    Scalar cs;    // mean of contrast-structure map
};

template <typename Scalar>
SsimStats<Scalar> ssim_stats(const PlaneArray<Scalar>& x, const PlaneArray<Scalar>& y) {
    constexpr int window = 11;
    const Scalar dynamic_range = 255;
    const Scalar c1 = (Scalar(0.01) * dynamic_range) * (Scalar(0.01) * dynamic_range);
    const Scalar c2 = (Scalar(0.03) * dynamic_range) * (Scalar(0.03) * dynamic_range);
    if (x.rows() < window || x.cols() < window)
        throw DimensionError("SSIM needs frames of at least 11x11");

    const auto taps = gaussian_taps<Scalar>(window, Scalar(1.5));
    const PlaneArray<Scalar> mu_x = filter_valid<Scalar>(x, taps);
    const PlaneArray<Scalar> mu_y = filter_valid<Scalar>(y, taps);
    const PlaneArray<Scalar> var_x = filter_valid<Scalar>(x * x, taps) - mu_x * mu_x;
    const PlaneArray<Scalar> var_y = filter_valid<Scalar>(y * y, taps) - mu_y * mu_y;
    const PlaneArray<Scalar> cov = filter_valid<Scalar>(x * y, taps) - mu_x * mu_y;

    const PlaneArray<Scalar> cs_map = (2 * cov + c2) / (var_x + var_y + c2);
    const PlaneArray<Scalar> l_map = (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1);
    return {(l_map * cs_map).mean(), cs_map.mean()};
}

}  // namespace detail

/// PSNR in dB on the 8-bit scale, capped at `cap_db` (reached for identical inputs).
template <typename Scalar = double, typename A, typename B>
Scalar psnr(const Eigen::DenseBase<A>& ref, const Eigen::DenseBase<B>& dist, Scalar cap_db = Scalar(100)) {
    detail::require_same_shape(ref, dist);
    const Scalar mse =
        (ref.derived().template cast<Scalar>().array() - dist.derived().template cast<Scalar>().array()).square().mean();
    if (mse <= Scalar(0)) return cap_db;
    const Scalar peak = 255;
    return std::min(cap_db, Scalar(10) * std::log10(peak * peak / mse));
}

/// Mean SSIM over 11x11 Gaussian (sigma 1.5) windows, valid region only.
template <typename Scalar = double, typename A, typename B>
Scalar ssim(const Eigen::DenseBase<A>& ref, const Eigen::DenseBase<B>& dist) {
    detail::require_same_shape(ref, dist);
    const PlaneArray<Scalar> x = ref.derived().template cast<Scalar>().array();
    const PlaneArray<Scalar> y = dist.derived().template cast<Scalar>().array();
    return detail::ssim_stats<Scalar>(x, y).ssim;
}

/// Mean contrast-structure term of SSIM (the luminance factor omitted).
template <typename Scalar = double, typename A, typename B>
Scalar ssim_contrast_structure(const Eigen::DenseBase<A>& ref, const Eigen::DenseBase<B>& dist) {
    detail::require_same_shape(ref, dist);
    const PlaneArray<Scalar> x = ref.derived().template cast<Scalar>().array();
    const PlaneArray<Scalar> y = dist.derived().template cast<Scalar>().array();
    return detail::ssim_stats<Scalar>(x, y).cs;
}

inline constexpr std::array<double, 5> kMsssimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Multi-scale SSIM. With fewer than five scales the leading weights are
/// renormalized to sum to one, so scales == 1 reduces to SSIM.
template <typename Scalar = double, typename A, typename B>
Scalar msssim(const Eigen::DenseBase<A>& ref, const Eigen::DenseBase<B>& dist, int scales = 5) {
    detail::require_same_shape(ref, dist);
    if (scales < 1 || scales > static_cast<int>(kMsssimWeights.size()))
        throw InvalidArgumentError("MS-SSIM scales must be in [1, 5]");
    const Eigen::Index min_side = Eigen::Index{11} << (scales - 1);
    if (ref.rows() < min_side || ref.cols() < min_side)
        throw DimensionError("MS-SSIM with " + std::to_string(scales) + " scales needs frames of at least " +
                             std::to_string(min_side) + "x" + std::to_string(min_side));

    Scalar weight_sum = 0;
    for (int s = 0; s < scales; ++s) weight_sum += static_cast<Scalar>(kMsssimWeights[s]);

    PlaneArray<Scalar> x = ref.derived().template cast<Scalar>().array();
    PlaneArray<Scalar> y = dist.derived().template cast<Scalar>().array();
    Scalar result = 1;
    for (int s = 0; s < scales; ++s) {
        const auto stats = detail::ssim_stats<Scalar>(x, y);
        const Scalar w = static_cast<Scalar>(kMsssimWeights[s]) / weight_sum;
        const Scalar term = (s + 1 < scales) ? stats.cs : stats.ssim;
        result *= std::pow(std::max(term, Scalar(0)), w);
        if (s + 1 < scales) {
            x = detail::downsample2<Scalar>(x);
            y = detail::downsample2<Scalar>(y);
        }
    }
    return result;
}

namespace detail {

/// Prewitt gradient magnitude with zero padding ("same" output size).
template <typename Scalar>
PlaneArray<Scalar> prewitt_magnitude(const PlaneArray<Scalar>& img) {
    const Eigen::Index rows = img.rows();
    const Eigen::Index cols = img.cols();
    PlaneArray<Scalar> padded = PlaneArray<Scalar>::Zero(rows + 2, cols + 2);
    padded.block(1, 1, rows, cols) = img;
    PlaneArray<Scalar> gx = PlaneArray<Scalar>::Zero(rows, cols);
    PlaneArray<Scalar> gy = PlaneArray<Scalar>::Zero(rows, cols);
    for (Eigen::Index k = 0; k < 3; ++k) {
        gx += padded.block(k, 2, rows, cols) - padded.block(k, 0, rows, cols);
        gy += padded.block(2, k, rows, cols) - padded.block(0, k, rows, cols);
    }
    gx /= Scalar(3);
    gy /= Scalar(3);
    return (gx * gx + gy * gy).sqrt();
}

}  // namespace detail

/// Gradient magnitude similarity deviation (0 for identical inputs).
/// Reported as the sample standard deviation of the similarity map.
template <typename Scalar = double, typename A, typename B>
Scalar gmsd(const Eigen::DenseBase<A>& ref, const Eigen::DenseBase<B>& dist, Scalar c = Scalar(170)) {
    detail::require_same_shape(ref, dist);
    if (ref.rows() < 4 || ref.cols() < 4) throw DimensionError("GMSD needs frames of at least 4x4");
    const PlaneArray<Scalar> x = detail::downsample2<Scalar>(ref.derived().template cast<Scalar>().array());
    const PlaneArray<Scalar> y = detail::downsample2<Scalar>(dist.derived().template cast<Scalar>().array());
    const PlaneArray<Scalar> gx = detail::prewitt_magnitude<Scalar>(x);
    const PlaneArray<Scalar> gy = detail::prewitt_magnitude<Scalar>(y);
    const PlaneArray<Scalar> gms = (2 * gx * gy + c) / (gx * gx + gy * gy + c);
    const Scalar mean = gms.mean();
    const Scalar n = static_cast<Scalar>(gms.size());
    return std::sqrt((gms - mean).square().sum() / (n - 1));
}

/// Dispatch one frame pair to the chosen kernel.
double score_frame(MetricId id, const LumaPlane& ref, const LumaPlane& dist, const MetricConfig& cfg = {});

/// Per-displayed-frame scores; stalled frames hold NaN.
struct QualityTimeSeries {
    std::string metric_name;
    bool higher_is_better = true;
    std::vector<double> values;
    std::vector<bool> stalled;

    std::size_t size() const { return values.size(); }
    /// Scores of the non-stalled frames, in display order.
    std::vector<double> playing_values() const;
    /// Throws unless lengths agree and every playing frame is finite.
    void validate() const;
};

QualityTimeSeries score_sequence(const FrameSequence& ref, const FrameSequence& dist, const FrameAlignment& align,
                                 MetricId metric, const MetricConfig& cfg = {}, unsigned threads = 1);

/// Load externally computed per-frame scores (`displayed_frame_index,score`).
/// Rows for stalled frames are dropped and reported through `warnings`.
QualityTimeSeries ingest_scores(const std::filesystem::path& path, const FrameAlignment& align,
                                std::string metric_name = "csv", bool higher_is_better = true,
                                std::vector<std::string>* warnings = nullptr);

}  // namespace atlas
