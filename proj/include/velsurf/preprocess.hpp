#pragma once

#include "velsurf/data_model.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace velsurf {

/// Affine map scaled = (raw - offset) / step.
struct AxisMap {
    double offset = 0.0;
    double step = 1.0;

    double forward(double raw) const noexcept { return (raw - offset) / step; }
    double inverse(double scaled) const noexcept { return offset + scaled * step; }
};

/// Per-axis maps between physical units (aligned ns, inches, m/s) and unit-grid coordinates.
struct AxisScaler {
    AxisMap time;
    AxisMap thickness;
    AxisMap velocity;

    Eigen::Vector2d scale_features(double time_ns, double thickness_in) const noexcept {
        return {time.forward(time_ns), thickness.forward(thickness_in)};
    }
    Eigen::Vector2d unscale_features(const Eigen::Vector2d& x) const noexcept {
        return {time.inverse(x(0)), thickness.inverse(x(1))};
    }
    double scale_velocity(double v) const noexcept { return velocity.forward(v); }
    double unscale_velocity(double s) const noexcept { return velocity.inverse(s); }

    bool valid() const noexcept;
};

/// Series shifted so that sample 0 is the onset and cut to a shared length.
struct AlignedDataset {
    std::vector<ExperimentSeries> experiments;
    std::size_t common_length = 0;
    std::vector<std::size_t> onset_index;  ///< onset sample in the pre-alignment series
    std::vector<double> onset_time_ns;     ///< onset time on the pre-alignment clock
};

struct PreprocessOptions {
    bool smooth = true;
    std::size_t half_width = 5;
    double threshold_frac = 0.05;
};

struct PointSource {
    std::size_t experiment = 0;  ///< index into ScaledDataset::experiment_ids
    std::size_t sample = 0;
};

/// SVR-ready training set: rows of `features` are (scaled time, scaled thickness).
struct ScaledDataset {
    Eigen::MatrixX2d features;
    Eigen::VectorXd targets;
    AxisScaler scaler;
    std::vector<PointSource> provenance;
    std::vector<std::string> experiment_ids;
    std::vector<double> thickness_in;
    std::size_t common_length = 0;
    PreprocessOptions preprocess;  ///< settings that produced the aligned series

    std::size_t size() const noexcept { return static_cast<std::size_t>(targets.size()); }

    /// Content hash of the scaled points.
    std::uint64_t fingerprint() const;

    /// Rows at the given indices, in that order; scaler and experiment table are retained.
    ScaledDataset subset(std::span<const std::size_t> rows) const;
};

/// Triangular-window moving average with weights (h + 1 - |j|), renormalised over the
/// in-bounds part of the window at the edges.
std::vector<double> smooth_triangular(std::span<const double> values, std::size_t half_width);

/// First index with v >= threshold_frac * max(v), or the sample nearest `t0_ns` when set.
std::size_t detect_start_time(const ExperimentSeries& series, double threshold_frac);

AlignedDataset align_and_truncate(const RawDataset& dataset, double threshold_frac);

/// Time step dt and the median thickness gap both map to one grid unit; velocity maps
/// its observed range onto [0, 1].
ScaledDataset scale_to_unit_grid(const AlignedDataset& aligned);

/// Scales aligned data with an existing scaler (no refitting).
ScaledDataset apply_scaler(const AlignedDataset& aligned, const AxisScaler& scaler);

RawDataset smooth_dataset(const RawDataset& dataset, std::size_t half_width);

/// smooth (optional) -> align -> truncate.
AlignedDataset prepare(const RawDataset& dataset, const PreprocessOptions& options);

/// prepare -> scale_to_unit_grid.
ScaledDataset preprocess(const RawDataset& dataset, const PreprocessOptions& options);

/// Scaled-dataset text file (header comments carry the scaler; rows are id,sample,t,w,v).
void write_scaled_dataset(std::ostream& out, const ScaledDataset& data);
ScaledDataset read_scaled_dataset(std::istream& in);

}  // namespace velsurf
