#pragma once

#include "velsurf/preprocess.hpp"
#include "velsurf/svr.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace velsurf {

enum class FoldStrategy { by_experiment, by_point };

std::string to_string(FoldStrategy strategy);
FoldStrategy parse_fold_strategy(const std::string& text);

struct FoldPlan {
    std::size_t k = 0;
    FoldStrategy strategy = FoldStrategy::by_experiment;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment;  ///< fold index per training point
};

/// Seeded shuffle of the units (experiments or points) dealt round-robin into k folds.
FoldPlan make_folds(const ScaledDataset& data, std::size_t k, FoldStrategy strategy, std::uint64_t seed);

/// sqrt(sum (pred - target)^2)
double l2_error(std::span<const double> predicted, std::span<const double> target);

struct CvResult {
    HyperParams params;
    std::vector<double> fold_errors;  ///< NaN for failed folds
    std::vector<bool> fold_ok;
    double mean_error = 0.0;          ///< over successful folds, scaled velocity units
    double n_support_mean = 0.0;
    double wall_time_s = 0.0;

    std::size_t converged_folds() const;
    bool complete() const { return converged_folds() == fold_ok.size(); }
};

/// Trains one model per fold and scores it on the held-out points with l2_error.
/// A fold that throws or fails to converge is marked failed instead of aborting the run.
CvResult cross_validate(const ScaledDataset& data, const HyperParams& params, const FoldPlan& plan,
                        const SolverConfig& config);

/// Axis values for the (gamma, C, epsilon) search over the isotropic RBF kernel.
struct GridSpec {
    std::vector<double> gammas{0.05, 0.1, 0.2, 0.3, 0.5};
    std::vector<double> Cs{0.25, 0.5, 0.75, 1.0, 2.0};
    std::vector<double> epsilons{0.001, 0.005, 0.01, 0.05};

    std::size_t size() const { return gammas.size() * Cs.size() * epsilons.size(); }
    void validate() const;
};

struct ErrorTable {
    GridSpec grid;
    std::vector<CvResult> results;  ///< gamma-major, then C, then epsilon
    std::size_t best = 0;

    std::size_t index(std::size_t gamma_i, std::size_t c_i, std::size_t eps_i) const {
        return (gamma_i * grid.Cs.size() + c_i) * grid.epsilons.size() + eps_i;
    }
    const CvResult& best_result() const { return results.at(best); }
};

struct GridSearchOptions {
    std::size_t jobs = 0;
    /// Called once per finished cell with (finished, total); may run on a worker thread.
    std::function<void(std::size_t, std::size_t)> progress;
};

/// Cross-validates every grid tuple with one shared fold plan. Best = lowest mean error among
/// complete cells, ties going to smaller gamma, then C, then epsilon.
ErrorTable grid_search(const ScaledDataset& data, const GridSpec& grid, std::size_t k, FoldStrategy strategy,
                       std::uint64_t seed, const SolverConfig& config, const GridSearchOptions& options = {});

/// Columns gamma,C,epsilon,fold_errors,mean_error,n_sv_mean,converged_folds,wall_time_s.
/// With include_timing=false the wall_time_s column is written as 0.
void write_error_table(std::ostream& out, const ErrorTable& table, bool include_timing = true);

}  // namespace velsurf
