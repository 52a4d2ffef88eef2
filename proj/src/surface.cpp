#include "velsurf/surface.hpp"

#include "io_util.hpp"
#include "velsurf/error.hpp"
#include "velsurf/parallel.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numeric>
#include <ostream>

namespace velsurf {

std::vector<double> GridAxis::values() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw DataError("grid step must be positive");
    if (!std::isfinite(start) || !std::isfinite(stop) || stop < start) throw DataError("grid range is degenerate");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = start + static_cast<double>(i) * step;
    return out;
}

SurfaceGrid reconstruct_surface(const SvrModel& model, const GridAxis& time_ns, const GridAxis& thickness_in,
                                const SurfaceOptions& options) {
    if (!(time_ns.step > 0.0) || !(thickness_in.step > 0.0)) throw DataError("grid step must be positive");
    const double cells = (std::floor((time_ns.stop - time_ns.start) / time_ns.step) + 1) *
                         (std::floor((thickness_in.stop - thickness_in.start) / thickness_in.step) + 1);
    if (cells > static_cast<double>(options.max_cells)) {
        throw DataError("surface grid of " + io::format_shortest(cells) + " cells exceeds the budget of " +
                        std::to_string(options.max_cells));
    }
    const auto times = time_ns.values();
    const auto widths = thickness_in.values();

    SurfaceGrid grid;
    grid.time_ns = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    grid.thickness_in = Eigen::Map<const Eigen::VectorXd>(widths.data(), static_cast<Eigen::Index>(widths.size()));
    grid.velocity_mps.resize(grid.time_ns.size(), grid.thickness_in.size());
    grid.model_fingerprint = model.fingerprint();
    parallel_for(times.size(), options.jobs, [&](std::size_t i) {
        for (std::size_t j = 0; j < widths.size(); ++j) {
            grid.velocity_mps(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                predict_physical(model, times[i], widths[j]);
        }
    });
    if (!grid.velocity_mps.allFinite()) throw NumericalError("surface contains non-finite values");
    return grid;
}

void write_surface_matrix(std::ostream& out, const SurfaceGrid& grid) {
    out << "thickness_in\\time_ns";
    for (Eigen::Index i = 0; i < grid.time_ns.size(); ++i) out << ',' << io::format_shortest(grid.time_ns(i));
    out << '\n';
    for (Eigen::Index j = 0; j < grid.thickness_in.size(); ++j) {
        out << io::format_shortest(grid.thickness_in(j));
        for (Eigen::Index i = 0; i < grid.time_ns.size(); ++i) out << ',' << io::format_shortest(grid.velocity_mps(i, j));
        out << '\n';
    }
}

void write_surface_xyz(std::ostream& out, const SurfaceGrid& grid) {
    out << "time_ns,thickness_in,velocity_mps\n";
    for (Eigen::Index j = 0; j < grid.thickness_in.size(); ++j) {
        for (Eigen::Index i = 0; i < grid.time_ns.size(); ++i) {
            out << io::format_shortest(grid.time_ns(i)) << ',' << io::format_shortest(grid.thickness_in(j)) << ','
                << io::format_shortest(grid.velocity_mps(i, j)) << '\n';
        }
    }
}

double outlier_score(const SvrModel& model, const ExperimentSeries& aligned_series) {
    if (aligned_series.velocities_mps.empty()) throw DataError("'" + aligned_series.id + "': empty series");
    if (std::abs(aligned_series.dt_ns - model.scaler.time.step) > 1e-9 * model.scaler.time.step) {
        throw DataError("'" + aligned_series.id + "': dt_ns " + io::format_shortest(aligned_series.dt_ns) +
                        " does not match the model's time step " + io::format_shortest(model.scaler.time.step));
    }
    std::size_t n = aligned_series.size();
    if (model.meta.common_length > 0) n = std::min(n, model.meta.common_length);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double measured = aligned_series.velocities_mps[i];
        const double predicted =
            predict_physical(model, static_cast<double>(i) * aligned_series.dt_ns, aligned_series.thickness_in);
        const double r = std::abs(predicted - measured) / std::max(std::abs(measured), kOutlierVelocityFloor);
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(n));
}

OutlierReport flag_outliers(std::span<const std::string> ids, std::span<const double> scores, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("outlier threshold must be positive");
    if (ids.size() != scores.size()) throw std::invalid_argument("flag_outliers: ids/scores size mismatch");
    OutlierReport report;
    report.threshold = threshold;
    for (std::size_t i = 0; i < ids.size(); ++i) report.entries.push_back({ids[i], scores[i], scores[i] > threshold});
    std::stable_sort(report.entries.begin(), report.entries.end(),
                     [](const OutlierEntry& a, const OutlierEntry& b) { return a.score > b.score; });
    return report;
}

std::vector<double> score_experiments(const SvrModel& model, const AlignedDataset& aligned) {
    std::vector<double> scores;
    scores.reserve(aligned.experiments.size());
    for (const auto& series : aligned.experiments) scores.push_back(outlier_score(model, series));
    return scores;
}

namespace {

AlignedDataset without(const AlignedDataset& aligned, std::span<const std::size_t> excluded) {
    AlignedDataset out;
    out.common_length = aligned.common_length;
    for (std::size_t e = 0; e < aligned.experiments.size(); ++e) {
        if (std::find(excluded.begin(), excluded.end(), e) != excluded.end()) continue;
        out.experiments.push_back(aligned.experiments[e]);
        out.onset_index.push_back(aligned.onset_index[e]);
        out.onset_time_ns.push_back(aligned.onset_time_ns[e]);
    }
    return out;
}

}  // namespace

// Plain leave-one-out lets one corrupted experiment drag the reference surface away from its
// neighbours, so those get flagged too. Each experiment is therefore scored against every model
// trained without it and without one other experiment, keeping the lowest score: as long as at
// most one other experiment is bad, one of those references is clean. Each pair model serves
// both of its excluded experiments, so n(n-1)/2 trainings are needed. With three experiments a
// pair model would rest on a single thickness, so plain leave-one-out is used instead.
std::vector<double> score_experiments_loo(const AlignedDataset& aligned, const HyperParams& params,
                                          const SolverConfig& config, std::size_t jobs) {
    const std::size_t n = aligned.experiments.size();
    if (n < 3) throw DataError("leave-one-out scoring needs at least 3 experiments");
    std::vector<double> scores(n, std::numeric_limits<double>::infinity());
    if (n == 3) {
        parallel_for(n, jobs, [&](std::size_t e) {
            const std::size_t excluded[] = {e};
            const SvrModel model = train(scale_to_unit_grid(without(aligned, excluded)), params, config);
            scores[e] = outlier_score(model, aligned.experiments[e]);
        });
        return scores;
    }
    std::vector<std::array<std::size_t, 2>> pairs;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) pairs.push_back({a, b});
    }
    std::vector<std::array<double, 2>> pair_scores(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t p) {
        const SvrModel model = train(scale_to_unit_grid(without(aligned, pairs[p])), params, config);
        pair_scores[p] = {outlier_score(model, aligned.experiments[pairs[p][0]]),
                          outlier_score(model, aligned.experiments[pairs[p][1]])};
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        for (int side = 0; side < 2; ++side) {
            const std::size_t e = pairs[p][static_cast<std::size_t>(side)];
            scores[e] = std::min(scores[e], pair_scores[p][static_cast<std::size_t>(side)]);
        }
    }
    return scores;
}

void write_outlier_report(std::ostream& out, const OutlierReport& report) {
    out << "id,score,flagged\n";
    for (const auto& entry : report.entries) {
        out << entry.id << ',' << io::format_shortest(entry.score) << ',' << (entry.flagged ? "true" : "false") << '\n';
    }
}

}  // namespace velsurf
