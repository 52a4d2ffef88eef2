#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include "io_util.hpp"
#include "velsurf/data_model.hpp"
#include "velsurf/error.hpp"
#include "velsurf/hash.hpp"
#include "velsurf/model_selection.hpp"
#include "velsurf/preprocess.hpp"
#include "velsurf/surface.hpp"
#include "velsurf/svr.hpp"
#include "velsurf/synthgen.hpp"

#ifndef VELSURF_VERSION
#define VELSURF_VERSION "0.0.0"
#endif

namespace velsurf::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kScaledDatasetFormatVersion = 1;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string version_text() {
    return std::string("velsurf ") + VELSURF_VERSION + " (model format " + std::to_string(kModelFormatVersion) +
           ", scaled-dataset format " + std::to_string(kScaledDatasetFormatVersion) + ")";
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    Fnv1a64 hash;
    char buffer[1 << 16];
    while (in.read(buffer, sizeof buffer) || in.gcount() > 0) hash.update(buffer, static_cast<std::size_t>(in.gcount()));
    return "fnv1a64:" + to_hex(hash.digest());
}

// Writes through a sibling temporary file and renames it into place, so readers never see a
// half-written output.
void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.empty()) throw UsageError("empty output path");
    if (!path.parent_path().empty() && !fs::is_directory(path.parent_path())) {
        throw DataError("output directory '" + path.parent_path().string() + "' does not exist");
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        body(out);
        out.flush();
        if (!out) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw DataError("write failed for '" + path.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw DataError("cannot move output into place at '" + path.string() + "'");
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

// One record per run: what was asked for, what was read and what was written.
struct Run {
    std::string command;
    json parameters = json::object();
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    fs::path manifest;  // explicit --manifest, else derived from the first output

    void output(const fs::path& path, const std::function<void(std::ostream&)>& body) {
        write_atomic(path, body);
        outputs.push_back(path);
    }

    void finish() const {
        fs::path target = manifest;
        if (target.empty()) {
            if (outputs.empty()) return;
            target = outputs.front();
            target += ".manifest.json";
        }
        json doc;
        doc["tool"] = "velsurf";
        doc["version"] = VELSURF_VERSION;
        doc["formats"] = {{"model", kModelFormatVersion}, {"scaled_dataset", kScaledDatasetFormatVersion}};
        doc["command"] = command;
        doc["parameters"] = parameters;
        doc["inputs"] = json::array();
        for (const auto& p : inputs) doc["inputs"].push_back({{"path", p.string()}, {"digest", file_digest(p)}});
        doc["outputs"] = json::array();
        for (const auto& p : outputs) doc["outputs"].push_back({{"path", p.string()}, {"digest", file_digest(p)}});
        doc["timestamp"] = utc_timestamp();
        write_atomic(target, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    }
};

json kernel_json(const Kernel& kernel) {
    return std::visit(
        [](const auto& k) -> json {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, RbfKernel>) {
                return {{"type", "rbf"}, {"gamma", k.gamma}};
            } else if constexpr (std::is_same_v<K, AnisotropicRbfKernel>) {
                return {{"type", "arbf"}, {"gamma", std::vector<double>(k.gamma.data(), k.gamma.data() + k.gamma.size())}};
            } else {
                return {{"type", "poly"}, {"degree", k.degree}, {"scale", k.scale}, {"offset", k.offset}};
            }
        },
        kernel);
}

json solver_json(const SolverConfig& c) {
    return {{"C", c.C},
            {"epsilon", c.epsilon},
            {"tolerance", c.tolerance},
            {"max_iterations", c.max_iterations},
            {"cache_budget_bytes", c.cache_budget_bytes}};
}

json preprocess_json(const PreprocessOptions& o) {
    return {{"smooth", o.smooth}, {"half_width", o.half_width}, {"threshold_frac", o.threshold_frac}};
}

ScaledDataset read_dataset_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return read_scaled_dataset(in);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail(), path.string());
    }
}

std::vector<ExperimentSeries> read_experiments(const std::vector<fs::path>& paths) {
    std::vector<ExperimentSeries> out;
    for (const auto& p : paths) out.push_back(read_experiment_file(p));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Settings for each subcommand, bound to CLI11 options.

struct Global {
    std::size_t jobs = 0;
    bool strict = false;
    fs::path manifest;
};

struct ValidateArgs {
    std::vector<fs::path> inputs;
    fs::path report;
    std::size_t min_length = ValidationLimits{}.min_length;
};

struct PreprocessArgs {
    std::vector<fs::path> inputs;
    fs::path output;
    bool no_smooth = false;
    std::size_t half_width = PreprocessOptions{}.half_width;
    double threshold = PreprocessOptions{}.threshold_frac;
};

struct SolverArgs {
    double tolerance = SolverConfig{}.tolerance;
    std::size_t max_iterations = SolverConfig{}.max_iterations;
    std::size_t cache_mb = SolverConfig{}.cache_budget_bytes >> 20;

    SolverConfig config(double C, double epsilon) const {
        SolverConfig c;
        c.C = C;
        c.epsilon = epsilon;
        c.tolerance = tolerance;
        c.max_iterations = max_iterations;
        c.cache_budget_bytes = cache_mb << 20;
        c.validate();
        return c;
    }
};

struct TrainArgs {
    fs::path dataset;
    fs::path output;
    fs::path params;
    std::string kernel = "rbf";
    double gamma = 0.1;
    double gamma_time = 0.3;
    double gamma_thickness = 0.005;
    int degree = 2;
    double poly_scale = 1.0;
    double poly_offset = 1.0;
    double C = 1.0;
    double epsilon = 0.001;
    SolverArgs solver;
    CLI::Option* gamma_opt = nullptr;
    CLI::Option* c_opt = nullptr;
    CLI::Option* eps_opt = nullptr;
};

struct GridArgs {
    fs::path dataset;
    fs::path output;
    fs::path best;
    std::vector<double> gammas = GridSpec{}.gammas;
    std::vector<double> Cs = GridSpec{}.Cs;
    std::vector<double> epsilons = GridSpec{}.epsilons;
    std::size_t k = 5;
    std::string strategy = "by_experiment";
    std::uint64_t seed = 1;
    bool timing = false;
    bool progress = false;
    SolverArgs solver;
};

struct PredictArgs {
    fs::path model;
    std::optional<double> time_ns;
    std::optional<double> thickness_in;
    fs::path query_csv;
    fs::path output;
};

struct SurfaceArgs {
    fs::path model;
    fs::path output;
    std::string format = "matrix";
    std::optional<double> time_start, time_stop, time_step;
    std::optional<double> thickness_start, thickness_stop, thickness_step;
    std::size_t max_cells = SurfaceOptions{}.max_cells;
};

struct OutlierArgs {
    fs::path model;
    std::vector<fs::path> inputs;
    fs::path output;
    double threshold = kDefaultOutlierThreshold;
    bool loo = false;
};

struct SynthArgs {
    fs::path out_dir;
    std::uint64_t seed = SynthConfig{}.seed;
    std::size_t n_steps = SynthConfig{}.n_steps;
    double dt_ns = SynthConfig{}.dt_ns;
    double noise_rel = SynthConfig{}.noise_rel;
    std::vector<double> thicknesses = SynthConfig{}.thicknesses_in;
    std::vector<std::string> scale;
    bool noiseless = false;
};

// ---------------------------------------------------------------------------------------------

int cmd_validate(const ValidateArgs& a, Run& run, std::ostream& out) {
    run.inputs = a.inputs;
    run.parameters = {{"min_length", a.min_length}};
    RawDataset data;
    data.experiments = read_experiments(a.inputs);
    ValidationLimits limits;
    limits.min_length = a.min_length;
    const auto report = validate_dataset(data, limits);
    if (a.report.empty()) {
        write_validation_report(out, report);
    } else {
        run.output(a.report, [&](std::ostream& o) { write_validation_report(o, report); });
    }
    return report.has_errors() ? kExitData : kExitOk;
}

int cmd_preprocess(const PreprocessArgs& a, Run& run) {
    run.inputs = a.inputs;
    const PreprocessOptions options{!a.no_smooth, a.half_width, a.threshold};
    if (!(options.threshold_frac > 0.0 && options.threshold_frac < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
    run.parameters = preprocess_json(options);
    const RawDataset raw = load_dataset(a.inputs);
    const auto report = validate_dataset(raw);
    for (const auto& issue : report.issues) {
        if (issue.severity == Severity::error) throw DataError("'" + issue.experiment_id + "': " + issue.message);
    }
    const ScaledDataset data = preprocess(raw, options);
    run.parameters["common_length"] = data.common_length;
    run.parameters["points"] = data.size();
    run.output(a.output, [&](std::ostream& o) { write_scaled_dataset(o, data); });
    return kExitOk;
}

HyperParams train_params(TrainArgs a) {
    if (!a.params.empty()) {
        std::ifstream in(a.params);
        if (!in) throw DataError("cannot open '" + a.params.string() + "'");
        json best;
        try {
            best = json::parse(in);
            if (!a.gamma_opt->count()) a.gamma = best.at("gamma").get<double>();
            if (!a.c_opt->count()) a.C = best.at("C").get<double>();
            if (!a.eps_opt->count()) a.epsilon = best.at("epsilon").get<double>();
        } catch (const json::exception& e) {
            throw DataError("'" + a.params.string() + "': " + e.what());
        }
    }
    HyperParams hp;
    hp.C = a.C;
    hp.epsilon = a.epsilon;
    if (a.kernel == "rbf") {
        hp.kernel = RbfKernel{a.gamma};
    } else if (a.kernel == "arbf") {
        Eigen::VectorXd g(2);
        g << a.gamma_time, a.gamma_thickness;
        hp.kernel = AnisotropicRbfKernel{g};
    } else {
        hp.kernel = PolynomialKernel{a.degree, a.poly_scale, a.poly_offset};
    }
    hp.validate();
    return hp;
}

int cmd_train(const TrainArgs& a, const Global& g, Run& run, std::ostream& err) {
    run.inputs = {a.dataset};
    if (!a.params.empty()) run.inputs.push_back(a.params);
    const HyperParams hp = train_params(a);
    const SolverConfig config = a.solver.config(hp.C, hp.epsilon);
    run.parameters = {{"kernel", kernel_json(hp.kernel)}, {"solver", solver_json(config)}};
    const ScaledDataset data = read_dataset_file(a.dataset);
    const SvrModel model = train(data, hp, config);
    run.parameters["support_vectors"] = model.support_count();
    run.parameters["converged"] = model.meta.converged;
    run.parameters["iterations"] = model.meta.iterations;
    run.output(a.output, [&](std::ostream& o) { save_model(o, model); });
    if (!model.meta.converged) {
        const std::string message =
            "solver did not converge within " + std::to_string(config.max_iterations) + " iterations";
        if (g.strict) throw NumericalError(message);
        err << json{{"warning", "numerical"}, {"message", message}}.dump() << '\n';
    }
    return kExitOk;
}

int cmd_gridsearch(const GridArgs& a, const Global& g, Run& run, std::ostream& err) {
    run.inputs = {a.dataset};
    const GridSpec grid{a.gammas, a.Cs, a.epsilons};
    try {
        grid.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const FoldStrategy strategy = parse_fold_strategy(a.strategy);
    const SolverConfig config = a.solver.config(1.0, 0.0);
    run.parameters = {{"gammas", a.gammas},         {"Cs", a.Cs},        {"epsilons", a.epsilons},
                      {"k", a.k},                   {"strategy", a.strategy}, {"seed", a.seed},
                      {"tolerance", config.tolerance}, {"max_iterations", config.max_iterations}};
    const ScaledDataset data = read_dataset_file(a.dataset);
    GridSearchOptions options;
    options.jobs = g.jobs;
    if (a.progress) {
        options.progress = [&err](std::size_t done, std::size_t total) {
            static std::mutex mutex;
            std::lock_guard lock(mutex);
            err << json{{"progress", done}, {"total", total}}.dump() << '\n';
        };
    }
    const ErrorTable table = grid_search(data, grid, a.k, strategy, a.seed, config, options);
    const CvResult& best = table.best_result();
    json best_doc = {{"gamma", std::get<RbfKernel>(best.params.kernel).gamma},
                     {"C", best.params.C},
                     {"epsilon", best.params.epsilon},
                     {"mean_error", best.mean_error},
                     {"complete", best.complete()}};
    run.output(a.output, [&](std::ostream& o) { write_error_table(o, table, a.timing); });
    fs::path best_path = a.best;
    if (best_path.empty()) best_path = a.output.parent_path() / (a.output.stem().string() + ".best.json");
    run.output(best_path, [&](std::ostream& o) { o << best_doc.dump(2) << '\n'; });
    run.parameters["best"] = best_doc;
    if (g.strict) {
        for (const auto& r : table.results) {
            if (!r.complete()) throw NumericalError("grid search has cells with failed folds");
        }
    }
    return kExitOk;
}

int cmd_predict(const PredictArgs& a, Run& run, std::ostream& out) {
    run.inputs = {a.model};
    const bool point = a.time_ns || a.thickness_in;
    if (point == !a.query_csv.empty()) throw UsageError("give either --time-ns with --thickness-in, or --query-csv");
    if (point && !(a.time_ns && a.thickness_in)) throw UsageError("--time-ns and --thickness-in go together");
    const SvrModel model = load_model(a.model);
    if (point) {
        run.parameters = {{"time_ns", *a.time_ns}, {"thickness_in", *a.thickness_in}};
        const double v = predict_physical(model, *a.time_ns, *a.thickness_in);
        if (a.output.empty()) {
            out << io::format_shortest(v) << '\n';
        } else {
            run.output(a.output, [&](std::ostream& o) { o << io::format_shortest(v) << '\n'; });
        }
        return kExitOk;
    }

    run.inputs.push_back(a.query_csv);
    std::ifstream in(a.query_csv);
    if (!in) throw DataError("cannot open '" + a.query_csv.string() + "'");
    std::ostringstream result;
    result << "time_ns,thickness_in,velocity_mps\n";
    std::string line;
    std::size_t line_no = 0, count = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = io::trim(line);
        if (text.empty() || text.front() == '#' || (line_no == 1 && text == "time_ns,thickness_in")) continue;
        const auto cells = io::split(text, ',');
        if (cells.size() != 2) throw ParseError(line_no, "expected 2 columns (time_ns,thickness_in)", a.query_csv.string());
        const auto t = io::parse_double(cells[0]);
        const auto w = io::parse_double(cells[1]);
        if (!t || !w) throw ParseError(line_no, "non-numeric cell", a.query_csv.string());
        result << io::format_shortest(*t) << ',' << io::format_shortest(*w) << ','
               << io::format_shortest(predict_physical(model, *t, *w)) << '\n';
        ++count;
    }
    run.parameters = {{"queries", count}};
    if (a.output.empty()) {
        out << result.str();
    } else {
        run.output(a.output, [&](std::ostream& o) { o << result.str(); });
    }
    return kExitOk;
}

int cmd_surface(const SurfaceArgs& a, const Global& g, Run& run) {
    run.inputs = {a.model};
    if (a.format != "matrix" && a.format != "xyz") throw UsageError("--format must be matrix or xyz");
    const SvrModel model = load_model(a.model);
    // Defaults span the training data: the aligned time window and the thickness range, the
    // latter sampled at a quarter of the experiment spacing.
    const double dt = model.scaler.time.step;
    const double t_last = model.meta.common_length > 0 ? dt * static_cast<double>(model.meta.common_length - 1) : 0.0;
    const GridAxis time{a.time_start.value_or(0.0), a.time_stop.value_or(t_last), a.time_step.value_or(dt)};
    const GridAxis thickness{a.thickness_start.value_or(model.meta.thickness_min_in),
                             a.thickness_stop.value_or(model.meta.thickness_max_in),
                             a.thickness_step.value_or(model.scaler.thickness.step / 4.0)};
    run.parameters = {{"format", a.format},
                      {"time_ns", {time.start, time.stop, time.step}},
                      {"thickness_in", {thickness.start, thickness.stop, thickness.step}},
                      {"max_cells", a.max_cells}};
    const SurfaceGrid grid = reconstruct_surface(model, time, thickness, {a.max_cells, g.jobs});
    run.output(a.output, [&](std::ostream& o) {
        if (a.format == "matrix") {
            write_surface_matrix(o, grid);
        } else {
            write_surface_xyz(o, grid);
        }
    });
    return kExitOk;
}

int cmd_outliers(const OutlierArgs& a, const Global& g, Run& run) {
    run.inputs = a.inputs;
    run.inputs.insert(run.inputs.begin(), a.model);
    if (!(a.threshold > 0.0)) throw UsageError("--threshold must be positive");
    const SvrModel model = load_model(a.model);
    const RawDataset raw = load_dataset(a.inputs);
    const AlignedDataset aligned = prepare(raw, model.meta.preprocess);
    run.parameters = {{"threshold", a.threshold}, {"loo", a.loo}, {"preprocess", preprocess_json(model.meta.preprocess)}};

    std::vector<double> scores;
    if (a.loo) {
        SolverConfig config = model.meta.solver;
        run.parameters["kernel"] = kernel_json(model.kernel);
        run.parameters["solver"] = solver_json(config);
        scores = score_experiments_loo(aligned, {model.kernel, config.C, config.epsilon}, config, g.jobs);
    } else {
        scores = score_experiments(model, aligned);
    }
    std::vector<std::string> ids;
    for (const auto& s : aligned.experiments) ids.push_back(s.id);
    const OutlierReport report = flag_outliers(ids, scores, a.threshold);
    run.output(a.output, [&](std::ostream& o) { write_outlier_report(o, report); });
    return kExitOk;
}

int cmd_synth(const SynthArgs& a, Run& run) {
    SynthConfig cfg;
    cfg.seed = a.seed;
    cfg.n_steps = a.n_steps;
    cfg.dt_ns = a.dt_ns;
    cfg.noise_rel = a.noise_rel;
    cfg.thicknesses_in = a.thicknesses;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    // --scale INDEX=FACTOR multiplies one experiment's velocities, e.g. to plant an outlier.
    std::map<std::size_t, double> factors;
    for (const auto& item : a.scale) {
        const auto parts = io::split(item, '=');
        const auto index = parts.size() == 2 ? io::parse_integer<std::size_t>(parts[0]) : std::nullopt;
        const auto factor = parts.size() == 2 ? io::parse_double(parts[1]) : std::nullopt;
        if (!index || !factor || *index >= cfg.thicknesses_in.size()) {
            throw UsageError("--scale expects INDEX=FACTOR with INDEX below the number of thicknesses, got '" + item + "'");
        }
        factors[*index] = *factor;
    }
    if (!fs::is_directory(a.out_dir)) {
        std::error_code ec;
        fs::create_directories(a.out_dir, ec);
        if (ec) throw DataError("cannot create '" + a.out_dir.string() + "'");
    }
    run.parameters = {{"seed", cfg.seed},           {"n_steps", cfg.n_steps},          {"dt_ns", cfg.dt_ns},
                      {"noise_rel", cfg.noise_rel}, {"thicknesses_in", cfg.thicknesses_in}, {"noiseless", a.noiseless},
                      {"scale", a.scale}};
    for (std::size_t e = 0; e < cfg.thicknesses_in.size(); ++e) {
        ExperimentSeries s = generate_profile(cfg.thicknesses_in[e], cfg, a.noiseless);
        if (const auto it = factors.find(e); it != factors.end()) {
            for (auto& v : s.velocities_mps) v *= it->second;
        }
        run.output(a.out_dir / (s.id + ".csv"), [&](std::ostream& o) { write_experiment(o, s); });
    }
    if (run.manifest.empty()) run.manifest = a.out_dir / "synth.manifest.json";
    return kExitOk;
}

void add_solver_flags(CLI::App* cmd, SolverArgs& s) {
    cmd->add_option("--tolerance", s.tolerance, "KKT stopping tolerance")->capture_default_str();
    cmd->add_option("--max-iterations", s.max_iterations, "SMO iteration cap")->capture_default_str();
    cmd->add_option("--cache-mb", s.cache_mb, "kernel row cache budget in MiB")->capture_default_str();
}

void report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
    err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Velocity-surface reconstruction from velocimetry series with epsilon-SVR", "velsurf"};
    app.set_version_flag("--version", version_text());
    app.set_config("--config", "", "key=value settings file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();

    Global g;
    app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)")->capture_default_str();
    app.add_flag("--strict", g.strict, "treat solver non-convergence as an error (exit 3)");
    app.add_option("--manifest", g.manifest, "where to write the run manifest (default: next to the first output)");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "check experiment files and write a validation report");
    validate->add_option("inputs", va.inputs, "experiment CSV files")->required()->check(CLI::ExistingFile);
    validate->add_option("--report", va.report, "report CSV (default: standard output)");
    validate->add_option("--min-length", va.min_length, "warn below this many samples")->capture_default_str();

    PreprocessArgs pa;
    auto* prep = app.add_subcommand("preprocess", "smooth, align and scale experiments into a training set");
    prep->add_option("inputs", pa.inputs, "experiment CSV files")->required()->check(CLI::ExistingFile);
    prep->add_option("-o,--out", pa.output, "scaled-dataset file")->required();
    prep->add_flag("--no-smooth", pa.no_smooth, "skip triangular smoothing");
    prep->add_option("--half-width", pa.half_width, "smoothing half width in samples")->capture_default_str();
    prep->add_option("--threshold", pa.threshold, "onset threshold as a fraction of the peak")->capture_default_str();

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "fit a model to a scaled dataset");
    tr->add_option("dataset", ta.dataset, "scaled-dataset file")->required()->check(CLI::ExistingFile);
    tr->add_option("-o,--out", ta.output, "model file")->required();
    tr->add_option("--params", ta.params, "best-parameters JSON from gridsearch (flags override)")->check(CLI::ExistingFile);
    tr->add_option("--kernel", ta.kernel, "rbf, arbf (per-axis rbf) or poly")
        ->check(CLI::IsMember({"rbf", "arbf", "poly"}))
        ->capture_default_str();
    ta.gamma_opt = tr->add_option("--gamma", ta.gamma, "rbf width")->capture_default_str();
    tr->add_option("--gamma-time", ta.gamma_time, "arbf width along time")->capture_default_str();
    tr->add_option("--gamma-thickness", ta.gamma_thickness, "arbf width along thickness")->capture_default_str();
    tr->add_option("--degree", ta.degree, "poly degree")->capture_default_str();
    tr->add_option("--poly-scale", ta.poly_scale, "poly inner-product scale")->capture_default_str();
    tr->add_option("--poly-offset", ta.poly_offset, "poly offset")->capture_default_str();
    ta.c_opt = tr->add_option("--C", ta.C, "coefficient bound")->capture_default_str();
    ta.eps_opt = tr->add_option("--epsilon", ta.epsilon, "tube half width (scaled units)")->capture_default_str();
    add_solver_flags(tr, ta.solver);

    GridArgs ga;
    auto* gs = app.add_subcommand("gridsearch", "cross-validate a (gamma, C, epsilon) grid");
    gs->add_option("dataset", ga.dataset, "scaled-dataset file")->required()->check(CLI::ExistingFile);
    gs->add_option("-o,--out", ga.output, "error-table CSV")->required();
    gs->add_option("--best", ga.best, "best-parameters JSON (default: <out stem>.best.json)");
    gs->add_option("--gammas", ga.gammas, "comma-separated gamma values")->delimiter(',')->capture_default_str();
    gs->add_option("--Cs", ga.Cs, "comma-separated C values")->delimiter(',')->capture_default_str();
    gs->add_option("--epsilons", ga.epsilons, "comma-separated epsilon values")->delimiter(',')->capture_default_str();
    gs->add_option("--k", ga.k, "number of folds")->capture_default_str();
    gs->add_option("--strategy", ga.strategy, "by_experiment or by_point")
        ->check(CLI::IsMember({"by_experiment", "by_point"}))
        ->capture_default_str();
    gs->add_option("--seed", ga.seed, "fold shuffle seed")->capture_default_str();
    gs->add_flag("--timing", ga.timing, "record wall times in the table (breaks byte-reproducibility)");
    gs->add_flag("--progress", ga.progress, "report finished cells on standard error");
    add_solver_flags(gs, ga.solver);

    PredictArgs pr;
    auto* pred = app.add_subcommand("predict", "evaluate a model at (time, thickness) queries");
    pred->add_option("model", pr.model, "model file")->required()->check(CLI::ExistingFile);
    pred->add_option("--time-ns", pr.time_ns, "aligned time in ns");
    pred->add_option("--thickness-in", pr.thickness_in, "thickness in inches");
    pred->add_option("--query-csv", pr.query_csv, "CSV of time_ns,thickness_in rows")->check(CLI::ExistingFile);
    pred->add_option("-o,--out", pr.output, "output file (default: standard output)");

    SurfaceArgs sa;
    auto* surf = app.add_subcommand("surface", "evaluate a model on a dense time x thickness grid");
    surf->add_option("model", sa.model, "model file")->required()->check(CLI::ExistingFile);
    surf->add_option("-o,--out", sa.output, "surface CSV")->required();
    surf->add_option("--format", sa.format, "matrix or xyz")->check(CLI::IsMember({"matrix", "xyz"}))->capture_default_str();
    surf->add_option("--time-start", sa.time_start, "first time in ns (default 0)");
    surf->add_option("--time-stop", sa.time_stop, "last time in ns (default: end of the training window)");
    surf->add_option("--time-step", sa.time_step, "time step in ns (default: sample spacing)");
    surf->add_option("--thickness-start", sa.thickness_start, "first thickness (default: thinnest training coupon)");
    surf->add_option("--thickness-stop", sa.thickness_stop, "last thickness (default: thickest training coupon)");
    surf->add_option("--thickness-step", sa.thickness_step, "thickness step (default: quarter of the spacing)");
    surf->add_option("--max-cells", sa.max_cells, "refuse larger grids")->capture_default_str();

    OutlierArgs oa;
    auto* outl = app.add_subcommand("outliers", "score experiments against a model and flag outliers");
    outl->add_option("model", oa.model, "model file")->required()->check(CLI::ExistingFile);
    outl->add_option("inputs", oa.inputs, "experiment CSV files")->required()->check(CLI::ExistingFile);
    outl->add_option("-o,--out", oa.output, "outlier report CSV")->required();
    outl->add_option("--threshold", oa.threshold, "flag scores above this")->capture_default_str();
    outl->add_flag("--loo", oa.loo, "score each experiment against models retrained without it");

    SynthArgs ya;
    auto* syn = app.add_subcommand("synth", "write synthetic experiment files");
    syn->add_option("--out-dir", ya.out_dir, "directory for the CSV files")->required();
    syn->add_option("--seed", ya.seed, "noise seed")->capture_default_str();
    syn->add_option("--n-steps", ya.n_steps, "samples per experiment")->capture_default_str();
    syn->add_option("--dt-ns", ya.dt_ns, "sample spacing")->capture_default_str();
    syn->add_option("--noise-rel", ya.noise_rel, "relative noise level")->capture_default_str();
    syn->add_option("--thicknesses", ya.thicknesses, "comma-separated thicknesses")->delimiter(',')->capture_default_str();
    syn->add_option("--scale", ya.scale, "INDEX=FACTOR: scale one experiment's velocities (repeatable)");
    syn->add_flag("--noiseless", ya.noiseless, "write the noiseless profiles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        report_error(err, "usage", e.what(), kExitUsage);
        return kExitUsage;
    }

    Run run;
    run.manifest = g.manifest;
    try {
        int code = kExitOk;
        CLI::App* cmd = app.get_subcommands().front();
        run.command = cmd->get_name();
        run.parameters = json::object();
        if (cmd == validate) code = cmd_validate(va, run, out);
        if (cmd == prep) code = cmd_preprocess(pa, run);
        if (cmd == tr) code = cmd_train(ta, g, run, err);
        if (cmd == gs) code = cmd_gridsearch(ga, g, run, err);
        if (cmd == pred) code = cmd_predict(pr, run, out);
        if (cmd == surf) code = cmd_surface(sa, g, run);
        if (cmd == outl) code = cmd_outliers(oa, g, run);
        if (cmd == syn) code = cmd_synth(ya, run);
        run.parameters["jobs"] = g.jobs;
        run.finish();
        if (code == kExitData) report_error(err, "data", "validation found errors", code);
        return code;
    } catch (const UsageError& e) {
        report_error(err, "usage", e.what(), kExitUsage);
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        report_error(err, "usage", e.what(), kExitUsage);
        return kExitUsage;
    } catch (const NumericalError& e) {
        // outputs written before the failure keep their manifest
        try {
            run.finish();
        } catch (...) {
        }
        report_error(err, "numerical", e.what(), kExitNumerical);
        return kExitNumerical;
    } catch (const std::exception& e) {
        report_error(err, "data", e.what(), kExitData);
        return kExitData;
    }
}

}  // namespace velsurf::cli
