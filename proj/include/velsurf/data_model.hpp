#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace velsurf {

/// One velocimetry sample: time in seconds, coupon thickness in inches, velocity in m/s.
struct DataPoint {
    double time_s = 0.0;
    double thickness_in = 0.0;
    double velocity_mps = 0.0;
};

/// One experiment's free-surface velocity record.
///
/// Samples are uniformly spaced: sample i was recorded at
/// `time_origin_ns + i * dt_ns`. `t0_ns`, when present, is the detonation
/// time on the same clock and overrides onset detection.
struct ExperimentSeries {
    std::string id;
    double thickness_in = 0.0;
    double dt_ns = 0.0;
    double time_origin_ns = 0.0;
    std::optional<double> t0_ns;
    std::vector<double> velocities_mps;

    std::size_t size() const noexcept { return velocities_mps.size(); }
    double time_ns(std::size_t i) const noexcept { return time_origin_ns + static_cast<double>(i) * dt_ns; }

    /// Flattens to (t, w, v) triples with time converted to seconds.
    std::vector<DataPoint> points() const;
};

struct RawDataset {
    std::vector<ExperimentSeries> experiments;
};

enum class Severity { warning, error };

struct ValidationIssue {
    Severity severity;
    std::string experiment_id;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool empty() const noexcept { return issues.empty(); }
    bool has_errors() const noexcept;
};

struct ValidationLimits {
    std::size_t min_length = 100;
    double min_thickness_in = 1e-3;
    double max_thickness_in = 10.0;
};

/// Parses the experiment CSV format. `default_id` is used when the file has no `# id=` line.
/// Throws ParseError carrying the offending line number.
ExperimentSeries parse_experiment(std::istream& in, const std::string& default_id = "");

/// Writes the experiment CSV format; parse_experiment reads it back exactly.
void write_experiment(std::ostream& out, const ExperimentSeries& series);

ExperimentSeries read_experiment_file(const std::filesystem::path& path);

/// Loads one series per path in the given order, ids defaulting to file stems.
/// Throws DataError on I/O failure, duplicate ids or duplicate thicknesses.
RawDataset load_dataset(std::span<const std::filesystem::path> paths);

/// Structural checks that never throw and never modify the dataset.
ValidationReport validate_dataset(const RawDataset& dataset, const ValidationLimits& limits = {});

void write_validation_report(std::ostream& out, const ValidationReport& report);

}  // namespace velsurf
