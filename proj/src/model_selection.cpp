#include "velsurf/model_selection.hpp"

#include "io_util.hpp"
#include "velsurf/error.hpp"
#include "velsurf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <tuple>

namespace velsurf {

std::string to_string(FoldStrategy strategy) {
    return strategy == FoldStrategy::by_experiment ? "by_experiment" : "by_point";
}

FoldStrategy parse_fold_strategy(const std::string& text) {
    if (text == "by_experiment" || text == "experiment") return FoldStrategy::by_experiment;
    if (text == "by_point" || text == "point") return FoldStrategy::by_point;
    throw std::invalid_argument("unknown fold strategy '" + text + "'");
}

FoldPlan make_folds(const ScaledDataset& data, std::size_t k, FoldStrategy strategy, std::uint64_t seed) {
    const std::size_t n = data.size();
    std::vector<std::size_t> unit_of_point(n);
    std::size_t units = 0;
    if (strategy == FoldStrategy::by_point) {
        std::iota(unit_of_point.begin(), unit_of_point.end(), std::size_t{0});
        units = n;
    } else {
        // Dense renumbering of the experiments present, in order of first appearance.
        std::vector<std::size_t> dense;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t e = data.provenance[i].experiment;
            if (e >= dense.size()) dense.resize(e + 1, std::numeric_limits<std::size_t>::max());
            if (dense[e] == std::numeric_limits<std::size_t>::max()) dense[e] = units++;
            unit_of_point[i] = dense[e];
        }
    }
    if (k < 2) throw DataError("k-fold cross-validation needs k >= 2");
    if (k > units) {
        throw DataError("k=" + std::to_string(k) + " exceeds the " + std::to_string(units) + " available " +
                        (strategy == FoldStrategy::by_point ? "points" : "experiments"));
    }

    // Fisher-Yates with raw engine output, so the permutation is the same on every platform.
    std::vector<std::size_t> order(units);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = units; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::size_t> fold_of_unit(units);
    for (std::size_t position = 0; position < units; ++position) fold_of_unit[order[position]] = position % k;

    FoldPlan plan;
    plan.k = k;
    plan.strategy = strategy;
    plan.seed = seed;
    plan.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) plan.assignment[i] = fold_of_unit[unit_of_point[i]];
    return plan;
}

double l2_error(std::span<const double> predicted, std::span<const double> target) {
    if (predicted.size() != target.size()) throw std::invalid_argument("l2_error: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("l2_error: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double r = predicted[i] - target[i];
        sum += r * r;
    }
    return std::sqrt(sum);
}

std::size_t CvResult::converged_folds() const {
    return static_cast<std::size_t>(std::count(fold_ok.begin(), fold_ok.end(), true));
}

CvResult cross_validate(const ScaledDataset& data, const HyperParams& params, const FoldPlan& plan,
                        const SolverConfig& config) {
    if (plan.assignment.size() != data.size()) throw std::invalid_argument("cross_validate: plan does not match dataset");
    const auto started = std::chrono::steady_clock::now();
    CvResult result;
    result.params = params;
    result.fold_errors.assign(plan.k, std::numeric_limits<double>::quiet_NaN());
    result.fold_ok.assign(plan.k, false);

    double error_sum = 0.0;
    double sv_sum = 0.0;
    for (std::size_t fold = 0; fold < plan.k; ++fold) {
        std::vector<std::size_t> train_rows;
        std::vector<std::size_t> test_rows;
        for (std::size_t i = 0; i < data.size(); ++i) (plan.assignment[i] == fold ? test_rows : train_rows).push_back(i);
        try {
            const SvrModel model = train(data.subset(train_rows), params, config);
            if (!model.meta.converged) continue;
            std::vector<double> predicted;
            std::vector<double> target;
            for (std::size_t i : test_rows) {
                const auto row = static_cast<Eigen::Index>(i);
                predicted.push_back(predict_scaled(model, data.features.row(row).transpose()));
                target.push_back(data.targets(row));
            }
            if (predicted.empty()) continue;
            result.fold_errors[fold] = l2_error(predicted, target);
            result.fold_ok[fold] = true;
            error_sum += result.fold_errors[fold];
            sv_sum += static_cast<double>(model.support_count());
        } catch (const DataError&) {
        } catch (const NumericalError&) {
        }
    }
    const std::size_t ok = result.converged_folds();
    result.mean_error = ok > 0 ? error_sum / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
    result.n_support_mean = ok > 0 ? sv_sum / static_cast<double>(ok) : 0.0;
    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

void GridSpec::validate() const {
    if (gammas.empty() || Cs.empty() || epsilons.empty()) throw std::invalid_argument("grid axes must be non-empty");
    for (double g : gammas) {
        if (!(g > 0.0)) throw std::invalid_argument("grid gamma values must be positive");
    }
    for (double c : Cs) {
        if (!(c > 0.0)) throw std::invalid_argument("grid C values must be positive");
    }
    for (double e : epsilons) {
        if (!(e >= 0.0)) throw std::invalid_argument("grid epsilon values must be non-negative");
    }
}

ErrorTable grid_search(const ScaledDataset& data, const GridSpec& grid, std::size_t k, FoldStrategy strategy,
                       std::uint64_t seed, const SolverConfig& config, const GridSearchOptions& options) {
    grid.validate();
    const FoldPlan plan = make_folds(data, k, strategy, seed);

    ErrorTable table;
    table.grid = grid;
    table.results.resize(grid.size());
    std::atomic<std::size_t> finished{0};
    parallel_for(grid.size(), options.jobs, [&](std::size_t cell) {
        const std::size_t e = cell % grid.epsilons.size();
        const std::size_t c = (cell / grid.epsilons.size()) % grid.Cs.size();
        const std::size_t g = cell / (grid.epsilons.size() * grid.Cs.size());
        table.results[cell] =
            cross_validate(data, HyperParams::rbf(grid.gammas[g], grid.Cs[c], grid.epsilons[e]), plan, config);
        const std::size_t done = ++finished;
        if (options.progress) options.progress(done, grid.size());
    });

    auto key = [&](std::size_t cell) {
        const CvResult& r = table.results[cell];
        const double mean = std::isnan(r.mean_error) ? std::numeric_limits<double>::infinity() : r.mean_error;
        const auto& rbf = std::get<RbfKernel>(r.params.kernel);
        return std::make_tuple(r.complete() ? 0 : 1, mean, rbf.gamma, r.params.C, r.params.epsilon);
    };
    table.best = 0;
    for (std::size_t cell = 1; cell < table.results.size(); ++cell) {
        if (key(cell) < key(table.best)) table.best = cell;
    }
    return table;
}

void write_error_table(std::ostream& out, const ErrorTable& table, bool include_timing) {
    const auto num = [](double v) { return std::isnan(v) ? std::string("nan") : io::format_shortest(v); };
    out << "gamma,C,epsilon,fold_errors,mean_error,n_sv_mean,converged_folds,wall_time_s\n";
    for (const CvResult& r : table.results) {
        const auto& rbf = std::get<RbfKernel>(r.params.kernel);
        out << num(rbf.gamma) << ',' << num(r.params.C) << ',' << num(r.params.epsilon) << ',';
        for (std::size_t f = 0; f < r.fold_errors.size(); ++f) out << (f ? ";" : "") << num(r.fold_errors[f]);
        out << ',' << num(r.mean_error) << ',' << num(r.n_support_mean) << ',' << r.converged_folds() << ','
            << (include_timing ? num(r.wall_time_s) : std::string("0")) << '\n';
    }
}

}  // namespace velsurf
