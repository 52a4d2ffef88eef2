// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here on purpose.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "velsurf/error.hpp"
#include "velsurf/model_selection.hpp"
#include "velsurf/solver.hpp"
#include "velsurf/surface.hpp"
#include "velsurf/svr.hpp"
#include "velsurf/synthgen.hpp"

#ifndef VELSURF_SOURCE_DIR
#define VELSURF_SOURCE_DIR "."
#endif

using namespace velsurf;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

// ---------------------------------------------------------------------------------------------
// Criteria 1 and 2 share the random instances.

constexpr int kOracleInstances = 50;
constexpr double kObjectiveAgreement = 1e-6;
constexpr double kPredictionAgreement = 1e-4;
constexpr double kOracleTimeBudget = 30.0;
constexpr double kOracleSmoTolerance = 1e-9;
constexpr double kKktTolerance = 1e-3;

struct Instance {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    double gamma, C, epsilon;
};

Instance oracle_instance(int seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 7919u + 13u);
    std::uniform_int_distribution<int> size(5, 30);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    const int n = size(rng);
    Instance inst{Eigen::MatrixXd(n, 2), Eigen::VectorXd(n), 0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const double a = u(rng), b = u(rng);
        inst.x.row(i) << a, b;
        inst.y(i) = std::sin(a) * std::cos(0.6 * b) + noise(rng);
    }
    inst.gamma = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    inst.C = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    // log-uniform so small tubes are well represented
    inst.epsilon = std::exp(std::uniform_real_distribution<double>(std::log(0.001), std::log(0.1))(rng));
    return inst;
}

Eigen::VectorXd decision(const Eigen::MatrixXd& gram_cross, const DualSolution& s) {
    return (gram_cross * s.beta).array() + s.bias;
}

Outcome criterion1() {
    Outcome o;
    const auto start = Clock::now();
    double worst_obj = 0.0, worst_pred = 0.0;
    for (int seed = 1; seed <= kOracleInstances; ++seed) {
        const Instance inst = oracle_instance(seed);
        const Kernel k = RbfKernel{inst.gamma};
        SolverConfig cfg;
        cfg.C = inst.C;
        cfg.epsilon = inst.epsilon;
        cfg.tolerance = kOracleSmoTolerance;
        const DualSolution smo = solve_epsilon_svr(inst.x, inst.y, k, cfg);
        const DualSolution ref = solve_qp_reference(inst.x, inst.y, k, cfg);
        o.require(smo.converged && ref.converged, "solver did not converge on instance " + std::to_string(seed));

        // predictions at the training points and at 50 fresh points
        Eigen::MatrixXd queries(inst.x.rows() + 50, 2);
        queries.topRows(inst.x.rows()) = inst.x;
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        std::uniform_real_distribution<double> u(0.0, 5.0);
        for (Eigen::Index q = inst.x.rows(); q < queries.rows(); ++q) queries.row(q) << u(rng), u(rng);
        Eigen::MatrixXd cross(queries.rows(), inst.x.rows());
        for (Eigen::Index a = 0; a < queries.rows(); ++a)
            for (Eigen::Index b = 0; b < inst.x.rows(); ++b)
                cross(a, b) = kernel_eval(k, queries.row(a).transpose(), inst.x.row(b).transpose());

        const double d_obj = std::abs(smo.objective - ref.objective);
        const double d_pred = (decision(cross, smo) - decision(cross, ref)).cwiseAbs().maxCoeff();
        worst_obj = std::max(worst_obj, d_obj);
        worst_pred = std::max(worst_pred, d_pred);
        o.require(d_obj <= kObjectiveAgreement, "objective gap " + fmt("%.3g", d_obj) + " on instance " + std::to_string(seed));
        o.require(d_pred <= kPredictionAgreement, "prediction gap " + fmt("%.3g", d_pred) + " on instance " + std::to_string(seed));
    }
    const double elapsed = seconds_since(start);
    o.require(elapsed < kOracleTimeBudget, "took " + fmt("%.1f", elapsed) + " s");
    if (o.pass) {
        o.detail = "max |dobj| " + fmt("%.2e", worst_obj) + ", max |dpred| " + fmt("%.2e", worst_pred) + ", " +
                   fmt("%.1f", elapsed) + " s";
    }
    return o;
}

Outcome criterion2() {
    Outcome o;
    double worst_kkt = 0.0;
    std::size_t checked = 0;
    for (int seed = 1; seed <= kOracleInstances; ++seed) {
        const Instance inst = oracle_instance(seed);
        const Kernel k = RbfKernel{inst.gamma};
        for (double tol : {kKktTolerance, kOracleSmoTolerance}) {
            SolverConfig cfg;
            cfg.C = inst.C;
            cfg.epsilon = inst.epsilon;
            cfg.tolerance = tol;
            cfg.record_objective = true;
            const DualSolution s = solve_epsilon_svr(inst.x, inst.y, k, cfg);
            const std::string where = " (instance " + std::to_string(seed) + ", tol " + fmt("%.0e", tol) + ")";
            o.require(s.converged, "not converged" + where);
            if (!s.converged) continue;
            ++checked;
            const double kkt = kkt_violation(s, inst.x, inst.y, k, cfg);
            if (tol == kKktTolerance) worst_kkt = std::max(worst_kkt, kkt);
            o.require(kkt <= tol, "kkt violation " + fmt("%.3g", kkt) + where);
            const double n = static_cast<double>(inst.y.size());
            o.require(std::abs(s.beta.sum()) <= 1e-9 * n * cfg.C, "sum(beta) != 0" + where);
            o.require(s.beta.cwiseAbs().maxCoeff() <= cfg.C, "|beta| > C" + where);
            for (std::size_t i = 1; i < s.objective_trace.size(); ++i) {
                o.require(s.objective_trace[i] >= s.objective_trace[i - 1], "objective decreased" + where);
            }
        }
    }
    if (o.pass) o.detail = std::to_string(checked) + " solutions, max kkt at 1e-3: " + fmt("%.2e", worst_kkt);
    return o;
}

// ---------------------------------------------------------------------------------------------

constexpr int kSparsityDatasets = 20;
constexpr double kSparsitySlack = 1e-3;

Outcome criterion3() {
    Outcome o;
    std::size_t inside_total = 0, models = 0;
    const double gammas[] = {0.1, 0.3, 0.5};
    const double Cs[] = {0.5, 1.0, 2.0};
    const double epsilons[] = {0.005, 0.01, 0.05};
    for (int seed = 1; seed <= kSparsityDatasets; ++seed) {
        SynthConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.n_steps = 400 + 20 * static_cast<std::size_t>(seed);
        const ScaledDataset data = preprocess(generate_dataset(cfg).data, PreprocessOptions{});
        const HyperParams hp = HyperParams::rbf(gammas[seed % 3], Cs[(seed / 3) % 3], epsilons[(seed / 9) % 3]);
        const SvrModel m = train(data, hp);
        ++models;
        o.require(m.meta.converged, "not converged on dataset " + std::to_string(seed));
        std::set<std::pair<double, double>> support;
        for (Eigen::Index i = 0; i < m.support_vectors.rows(); ++i)
            support.insert({m.support_vectors(i, 0), m.support_vectors(i, 1)});
        for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
            const double residual = std::abs(data.targets(r) - predict_scaled(m, data.features.row(r).transpose()));
            if (residual < hp.epsilon - kSparsitySlack) {
                ++inside_total;
                o.require(!support.contains({data.features(r, 0), data.features(r, 1)}),
                          "point inside the tube has a non-zero coefficient (dataset " + std::to_string(seed) + ")");
            }
        }
    }
    if (o.pass) o.detail = std::to_string(models) + " models, " + std::to_string(inside_total) + " in-tube points all zero";
    return o;
}

// ---------------------------------------------------------------------------------------------

Outcome criterion4() {
    Outcome o;
    const RawDataset raw = generate_dataset(SynthConfig{}).data;
    const ScaledDataset data = preprocess(raw, PreprocessOptions{});
    std::set<double> thickness_levels;
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
        thickness_levels.insert(data.features(r, 1));
        if (r > 0 && data.provenance[r].experiment == data.provenance[r - 1].experiment) {
            o.require(data.features(r, 0) - data.features(r - 1, 0) == 1.0, "time spacing is not exactly 1");
        }
    }
    const std::vector<double> levels(thickness_levels.begin(), thickness_levels.end());
    o.require(levels.size() == 5, "expected 5 thickness levels");
    for (std::size_t i = 1; i < levels.size(); ++i) o.require(levels[i] - levels[i - 1] == 1.0, "thickness spacing is not exactly 1");

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> t(0.0, 4000.0), w(0.2, 0.6), v(-200.0, 2500.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double ti = t(rng), wi = w(rng), vi = v(rng);
        const Eigen::Vector2d back = data.scaler.unscale_features(data.scaler.scale_features(ti, wi));
        const double vb = data.scaler.unscale_velocity(data.scaler.scale_velocity(vi));
        worst = std::max({worst, std::abs(back(0) - ti) / std::abs(ti), std::abs(back(1) - wi) / std::abs(wi),
                          std::abs(vb - vi) / std::abs(vi)});
    }
    o.require(worst <= 1e-12, "scaler round trip error " + fmt("%.3g", worst));

    std::normal_distribution<double> n(0.0, 300.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t h = static_cast<std::size_t>(trial % 12);
        std::vector<double> c(50 + static_cast<std::size_t>(trial), n(rng));
        o.require(smooth_triangular(c, h) == c, "smoothing changed a constant sequence");
        std::vector<double> x(c.size());
        for (auto& xi : x) xi = n(rng);
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        for (double s : smooth_triangular(x, h)) o.require(s >= *lo && s <= *hi, "smoothing left the input range");
    }
    for (const auto& s : raw.experiments) {
        const auto sm = smooth_triangular(s.velocities_mps, 5);
        const auto [lo, hi] = std::minmax_element(s.velocities_mps.begin(), s.velocities_mps.end());
        for (double x : sm) o.require(x >= *lo && x <= *hi, "smoothing left the input range");
    }
    if (o.pass) o.detail = "max scaler round-trip error " + fmt("%.2e", worst);
    return o;
}

// ---------------------------------------------------------------------------------------------

constexpr double kInterpolationBound = 0.08;
constexpr double kHeldOutThickness = 0.375;

double relative_rms(std::span<const double> predicted, std::span<const double> truth) {
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double r = (predicted[i] - truth[i]) / std::max(std::abs(truth[i]), kOutlierVelocityFloor);
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(truth.size()));
}

Outcome criterion5(bool quick_grid, std::size_t jobs) {
    Outcome o;
    const auto start = Clock::now();
    const SynthConfig cfg;
    const SynthDataset synth = generate_dataset(cfg);
    RawDataset train_raw;
    const ExperimentSeries* held_out = nullptr;
    for (const auto& s : synth.data.experiments) {
        if (s.thickness_in == kHeldOutThickness) {
            held_out = &s;
        } else {
            train_raw.experiments.push_back(s);
        }
    }
    if (!held_out) return {false, "held-out thickness missing"};

    const PreprocessOptions options;
    const ScaledDataset data = preprocess(train_raw, options);
    // --quick-grid trades the default grid for a 3x3x2 one around the historical optimum
    const GridSpec grid = quick_grid ? GridSpec{{0.1, 0.2, 0.3}, {0.5, 0.75, 1.0}, {0.001, 0.005}} : GridSpec{};
    const ErrorTable table = grid_search(data, grid, data.experiment_ids.size(), FoldStrategy::by_experiment, 1, {},
                                         GridSearchOptions{jobs, {}});
    const HyperParams best = table.best_result().params;
    const SvrModel model = train(data, best);
    o.require(model.meta.converged, "final model did not converge");

    // The held-out series goes through the same smoothing and onset detection as training data;
    // the noiseless generator supplies the truth on that aligned clock.
    const ExperimentSeries smoothed{held_out->id, held_out->thickness_in, held_out->dt_ns, held_out->time_origin_ns,
                                    std::nullopt, smooth_triangular(held_out->velocities_mps, options.half_width)};
    const double onset = smoothed.time_ns(detect_start_time(smoothed, options.threshold_frac));
    const std::size_t len = model.meta.common_length;
    std::vector<double> predicted(len), truth(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) * cfg.dt_ns;
        predicted[i] = predict_physical(model, t, kHeldOutThickness);
        truth[i] = synth.truth(onset + t, kHeldOutThickness);
    }
    const double err = relative_rms(predicted, truth);
    o.require(err <= kInterpolationBound, "relative RMS " + fmt("%.4f", err) + " > 0.08");
    const double elapsed = seconds_since(start);
    const auto& kb = std::get<RbfKernel>(best.kernel);
    o.detail = std::string(quick_grid ? "reduced 3x3x2" : "default") + " grid, best (gamma, C, eps) = (" +
               fmt("%g", kb.gamma) + ", " + fmt("%g", best.C) + ", " + fmt("%g", best.epsilon) + "), relative RMS " +
               fmt("%.4f", err) + ", " + fmt("%.0f", elapsed) + " s" + (o.pass ? "" : " -- " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------------------------

constexpr double kDegenerateRatio = 5.0;

Outcome criterion6() {
    Outcome o;
    const ScaledDataset data = preprocess(generate_dataset(SynthConfig{}).data, PreprocessOptions{});
    const HyperParams defaults;
    const double gamma = std::get<RbfKernel>(defaults.kernel).gamma;
    const double range = data.targets.maxCoeff() - data.targets.minCoeff();
    const FoldPlan plan = make_folds(data, 5, FoldStrategy::by_experiment, 1);
    const CvResult small = cross_validate(data, HyperParams::rbf(gamma, defaults.C, 0.001), plan, {});
    const CvResult wide = cross_validate(data, HyperParams::rbf(gamma, defaults.C, range), plan, {});
    o.require(small.complete() && wide.complete(), "cross-validation had failed folds");
    const double ratio = wide.mean_error / small.mean_error;
    o.require(ratio >= kDegenerateRatio, "ratio " + fmt("%.2f", ratio) + " < 5");
    o.detail = "CV error " + fmt("%.4g", small.mean_error) + " at eps=0.001 vs " + fmt("%.4g", wide.mean_error) +
               " at eps=range (" + fmt("%.3g", range) + "), ratio " + fmt("%.1f", ratio) + (o.pass ? "" : " -- " + o.detail);
    return o;
}

// ---------------------------------------------------------------------------------------------

constexpr int kOutlierSeeds = 5;
constexpr double kCorruptionFactor = 2.0;

Outcome criterion7(std::size_t jobs) {
    Outcome o;
    double lowest_flagged = std::numeric_limits<double>::infinity(), highest_clean = 0.0;
    Eigen::VectorXd gamma(2);
    gamma << 0.3, 0.005;  // per-axis widths (time, thickness) in unit-grid coordinates
    const HyperParams params{AnisotropicRbfKernel{gamma}, 1.0, 0.001};
    for (int seed = 1; seed <= kOutlierSeeds; ++seed) {
        SynthConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(seed);
        RawDataset raw = generate_dataset(cfg).data;
        const std::size_t bad = static_cast<std::size_t>(seed - 1) % raw.experiments.size();
        for (auto& v : raw.experiments[bad].velocities_mps) v *= kCorruptionFactor;
        const AlignedDataset aligned = prepare(raw, PreprocessOptions{});
        const auto scores = score_experiments_loo(aligned, params, {}, jobs);
        for (std::size_t e = 0; e < scores.size(); ++e) {
            const std::string where = " (seed " + std::to_string(seed) + ", experiment " + std::to_string(e) + ")";
            if (e == bad) {
                lowest_flagged = std::min(lowest_flagged, scores[e]);
                o.require(scores[e] > kDefaultOutlierThreshold, "corrupted score " + fmt("%.4f", scores[e]) + where);
            } else {
                highest_clean = std::max(highest_clean, scores[e]);
                o.require(scores[e] < kDefaultOutlierThreshold, "clean score " + fmt("%.4f", scores[e]) + where);
            }
        }
    }
    if (o.pass) {
        o.detail = "lowest corrupted score " + fmt("%.3f", lowest_flagged) + ", highest clean score " +
                   fmt("%.3f", highest_clean) + " (threshold 0.10)";
    }
    return o;
}

// ---------------------------------------------------------------------------------------------

Outcome criterion8(std::size_t jobs) {
    Outcome o;
    const ScaledDataset data = preprocess(generate_dataset(SynthConfig{}).data, PreprocessOptions{});
    for (auto strategy : {FoldStrategy::by_experiment, FoldStrategy::by_point}) {
        for (std::size_t k = 2; k <= 5; ++k) {
            const FoldPlan plan = make_folds(data, k, strategy, 42);
            o.require(plan.assignment.size() == data.size(), "plan does not cover every point");
            std::vector<std::size_t> validated(data.size(), 0), trained(data.size(), 0);
            for (std::size_t f = 0; f < k; ++f) {
                for (std::size_t r = 0; r < data.size(); ++r) ++(plan.assignment[r] == f ? validated : trained)[r];
            }
            for (std::size_t r = 0; r < data.size(); ++r) {
                o.require(validated[r] == 1 && trained[r] == k - 1,
                          "point " + std::to_string(r) + " not validated exactly once (" + to_string(strategy) + ", k=" +
                              std::to_string(k) + ")");
            }
            if (strategy == FoldStrategy::by_experiment) {
                for (std::size_t r = 1; r < data.size(); ++r) {
                    if (data.provenance[r].experiment == data.provenance[r - 1].experiment)
                        o.require(plan.assignment[r] == plan.assignment[r - 1], "experiment split across folds");
                }
            }
        }
    }
    const GridSpec grid{{0.3, 0.5}, {1.0}, {0.01, 0.05}};
    std::string tables[3];
    const std::size_t job_counts[3] = {1, 1, std::max<std::size_t>(2, jobs)};
    for (int run = 0; run < 3; ++run) {
        std::ostringstream out;
        write_error_table(out, grid_search(data, grid, 3, FoldStrategy::by_point, 99, {}, GridSearchOptions{job_counts[run], {}}),
                          false);
        tables[run] = out.str();
    }
    o.require(tables[0] == tables[1] && tables[1] == tables[2], "error tables differ between identical runs");
    if (o.pass) o.detail = "8 fold plans partition exactly; 3 grid-search reruns byte-identical";
    return o;
}

// ---------------------------------------------------------------------------------------------

Outcome criterion9() {
    Outcome o;
    SynthConfig cfg;
    cfg.n_steps = 600;
    const SynthDataset synth = generate_dataset(cfg);
    const ScaledDataset data = preprocess(synth.data, PreprocessOptions{});
    const SvrModel model = train(data, HyperParams::rbf(0.2, 1.0, 0.005));
    std::ostringstream saved;
    save_model(saved, model);
    const std::string text = saved.str();
    std::istringstream in(text);
    const SvrModel loaded = load_model(in);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> t(0.0, 900.0), w(0.2, 0.55);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double ti = t(rng), wi = w(rng);
        const double a = predict_physical(model, ti, wi), b = predict_physical(loaded, ti, wi);
        worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
    }
    o.require(worst <= 1e-12, "save/load prediction drift " + fmt("%.3g", worst));

    for (const auto& s : synth.data.experiments) {
        std::stringstream buf;
        write_experiment(buf, s);
        const ExperimentSeries back = parse_experiment(buf, "");
        o.require(back.id == s.id && back.thickness_in == s.thickness_in && back.dt_ns == s.dt_ns &&
                      back.time_origin_ns == s.time_origin_ns && back.velocities_mps == s.velocities_mps,
                  "experiment CSV round trip changed " + s.id);
    }

    // every single-byte corruption and every truncation must be refused, never misread
    std::size_t rejected = 0, attempts = 0;
    std::uniform_int_distribution<std::size_t> pos(0, text.size() - 1);
    std::uniform_int_distribution<int> bit(0, 7);
    auto refused = [&](const std::string& damaged) {
        std::istringstream d(damaged);
        try {
            load_model(d);
        } catch (const FormatError&) {
            return true;
        }
        return false;
    };
    for (int i = 0; i < 300; ++i) {
        std::string damaged = text;
        damaged[pos(rng)] ^= static_cast<char>(1 << bit(rng));
        ++attempts;
        if (refused(damaged)) ++rejected;
    }
    for (int i = 0; i < 100; ++i) {
        ++attempts;
        if (refused(text.substr(0, pos(rng)))) ++rejected;
    }
    std::string version = text;
    version.replace(0, text.find('\n'), "velsurf-model 99");
    bool version_error = false;
    try {
        std::istringstream d(version);
        load_model(d);
    } catch (const FormatError& e) {
        version_error = e.kind() == FormatError::Kind::version;
    }
    o.require(version_error, "unknown version not reported as a version error");
    o.require(rejected == attempts, std::to_string(attempts - rejected) + " damaged files were accepted");
    if (o.pass) {
        o.detail = "max round-trip drift " + fmt("%.1e", worst) + ", " + std::to_string(rejected) + "/" +
                   std::to_string(attempts) + " damaged files rejected";
    }
    return o;
}

// ---------------------------------------------------------------------------------------------

Outcome criterion10() {
    Outcome o;
    std::ifstream in(std::string(VELSURF_SOURCE_DIR) + "/README.md");
    const std::string readme{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    o.require(!readme.empty(), "README.md not found");
    o.require(readme.find("0.75") != std::string::npos && readme.find("0.001") != std::string::npos &&
                  readme.find("historical") != std::string::npos,
              "README lacks the historical optimum note");
    const GridSpec grid;
    auto has = [](const std::vector<double>& v, double x) { return std::find(v.begin(), v.end(), x) != v.end(); };
    o.require(has(grid.gammas, 0.1) && has(grid.Cs, 0.75) && has(grid.Cs, 1.0) && has(grid.epsilons, 0.001),
              "default grid does not contain the historical optimum");
    const HyperParams defaults;
    o.require(std::get<RbfKernel>(defaults.kernel).gamma == 0.1 && defaults.C == 1.0 && defaults.epsilon == 0.001,
              "default hyperparameters differ from the historical optimum");
    if (o.pass) o.detail = "README records <0.1, 0.75-1.0, 0.001>; default grid and defaults contain it";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"velsurf acceptance suite"};
    bool quick_grid = false;
    std::size_t jobs = 0;
    std::vector<int> only;
    app.add_flag("--quick-grid", quick_grid, "criterion 5 on a 3x3x2 grid instead of the default one");
    app.add_option("--jobs", jobs, "worker threads (0 = all cores)");
    app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, criterion1},
        {2, criterion2},
        {3, criterion3},
        {4, criterion4},
        {5, [&] { return criterion5(quick_grid, jobs); }},
        {6, criterion6},
        {7, [&] { return criterion7(jobs); }},
        {8, [&] { return criterion8(jobs); }},
        {9, criterion9},
        {10, criterion10},
    };
    int failures = 0;
    for (const auto& [id, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome result;
        try {
            result = check();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        if (!result.pass) ++failures;
        std::printf("criterion %d: %s  %s\n", id, result.pass ? "PASS" : "FAIL", result.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
