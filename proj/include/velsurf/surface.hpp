#pragma once

#include "velsurf/preprocess.hpp"
#include "velsurf/svr.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace velsurf {

/// Closed range sampled at start, start + step, ... up to stop.
struct GridAxis {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    std::vector<double> values() const;
};

struct SurfaceGrid {
    Eigen::VectorXd time_ns;
    Eigen::VectorXd thickness_in;
    Eigen::MatrixXd velocity_mps;  ///< |time| x |thickness|
    std::uint64_t model_fingerprint = 0;
};

struct SurfaceOptions {
    std::size_t max_cells = 10'000'000;
    std::size_t jobs = 0;
};

SurfaceGrid reconstruct_surface(const SvrModel& model, const GridAxis& time_ns, const GridAxis& thickness_in,
                                const SurfaceOptions& options = {});

/// First row holds the time axis, first column the thickness axis.
void write_surface_matrix(std::ostream& out, const SurfaceGrid& grid);
/// Long form: time_ns,thickness_in,velocity_mps.
void write_surface_xyz(std::ostream& out, const SurfaceGrid& grid);

inline constexpr double kOutlierVelocityFloor = 1.0;  // m/s
inline constexpr double kDefaultOutlierThreshold = 0.10;

/// RMS of |prediction - measurement| / max(|measurement|, 1 m/s) over an aligned series,
/// truncated to the model's training length.
double outlier_score(const SvrModel& model, const ExperimentSeries& aligned_series);

struct OutlierEntry {
    std::string id;
    double score = 0.0;
    bool flagged = false;
};

struct OutlierReport {
    std::vector<OutlierEntry> entries;  ///< descending score
    double threshold = kDefaultOutlierThreshold;
};

/// flagged <=> score > threshold (strict).
OutlierReport flag_outliers(std::span<const std::string> ids, std::span<const double> scores, double threshold);

/// Scores every aligned experiment against one model.
std::vector<double> score_experiments(const SvrModel& model, const AlignedDataset& aligned);

/// Leave-out scoring: each experiment is scored against models retrained without it. With four
/// or more experiments the reference also drops one other experiment (every choice is tried and
/// the lowest score kept), so a single other bad experiment cannot contaminate the reference.
std::vector<double> score_experiments_loo(const AlignedDataset& aligned, const HyperParams& params,
                                          const SolverConfig& config, std::size_t jobs = 0);

void write_outlier_report(std::ostream& out, const OutlierReport& report);

}  // namespace velsurf
