#include "velsurf/svr.hpp"

#include "io_util.hpp"
#include "velsurf/error.hpp"
#include "velsurf/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace velsurf {

std::string to_hex(std::uint64_t value) {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
    return buffer;
}

void HyperParams::validate() const {
    validate_kernel(kernel);
    if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("C must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be non-negative");
}

SvrModel train(const ScaledDataset& data, const HyperParams& params, SolverConfig config) {
    params.validate();
    if (data.size() == 0) throw DataError("train: empty dataset");
    config.C = params.C;
    config.epsilon = params.epsilon;
    const DualSolution sol = solve_epsilon_svr(data.features, data.targets, params.kernel, config);

    SvrModel model;
    model.kernel = params.kernel;
    model.scaler = data.scaler;
    model.bias = sol.bias;
    const auto n_sv = static_cast<Eigen::Index>((sol.beta.array() != 0.0).count());
    model.support_vectors.resize(n_sv, 2);
    model.coefficients.resize(n_sv);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < sol.beta.size(); ++i) {
        if (sol.beta(i) == 0.0) continue;
        model.support_vectors.row(row) = data.features.row(i);
        model.coefficients(row) = sol.beta(i);
        ++row;
    }
    model.meta.n_train = data.size();
    model.meta.converged = sol.converged;
    model.meta.objective = sol.objective;
    model.meta.iterations = sol.iterations;
    model.meta.solver = config;
    model.meta.solver.record_objective = false;
    model.meta.dataset_fingerprint = data.fingerprint();
    model.meta.common_length = data.common_length;
    model.meta.preprocess = data.preprocess;
    if (!data.thickness_in.empty()) {
        const auto [lo, hi] = std::minmax_element(data.thickness_in.begin(), data.thickness_in.end());
        model.meta.thickness_min_in = *lo;
        model.meta.thickness_max_in = *hi;
    }
    return model;
}

double predict_scaled(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != model.support_vectors.cols()) {
        throw std::invalid_argument("predict: expected a " + std::to_string(model.support_vectors.cols()) +
                                    "-dimensional query, got " + std::to_string(x.size()));
    }
    const Eigen::Index m = model.support_vectors.rows();
    double sum = 0.0;
    if (const auto* rbf = std::get_if<RbfKernel>(&model.kernel)) {
        const double* c0 = model.support_vectors.col(0).data();
        const double* c1 = model.support_vectors.col(1).data();
        for (Eigen::Index k = 0; k < m; ++k) {
            const double d0 = c0[k] - x(0);
            const double d1 = c1[k] - x(1);
            sum += model.coefficients(k) * detail::exp_neg(rbf->gamma * (d0 * d0 + d1 * d1));
        }
    } else {
        for (Eigen::Index k = 0; k < m; ++k) {
            sum += model.coefficients(k) * kernel_eval(model.kernel, model.support_vectors.row(k), x.transpose());
        }
    }
    return sum + model.bias;
}

double predict_physical(const SvrModel& model, double time_ns, double thickness_in) {
    const Eigen::Vector2d x = model.scaler.scale_features(time_ns, thickness_in);
    return model.scaler.unscale_velocity(predict_scaled(model, x));
}

// ---------------------------------------------------------------------------------------------
// Model file

namespace {

constexpr std::string_view kMagic = "velsurf-model";
constexpr std::string_view kChecksumPrefix = "checksum=fnv1a64:";

std::string body_text(const SvrModel& model) {
    std::ostringstream out;
    const auto g = [](double v) { return io::format_g17(v); };
    out << "[meta]\n";
    out << "n_train=" << model.meta.n_train << '\n';
    out << "converged=" << (model.meta.converged ? 1 : 0) << '\n';
    out << "objective=" << g(model.meta.objective) << '\n';
    out << "iterations=" << model.meta.iterations << '\n';
    out << "C=" << g(model.meta.solver.C) << '\n';
    out << "epsilon=" << g(model.meta.solver.epsilon) << '\n';
    out << "tolerance=" << g(model.meta.solver.tolerance) << '\n';
    out << "max_iterations=" << model.meta.solver.max_iterations << '\n';
    out << "cache_budget_bytes=" << model.meta.solver.cache_budget_bytes << '\n';
    out << "dataset_fingerprint=" << to_hex(model.meta.dataset_fingerprint) << '\n';
    out << "common_length=" << model.meta.common_length << '\n';
    out << "smooth=" << (model.meta.preprocess.smooth ? 1 : 0) << '\n';
    out << "half_width=" << model.meta.preprocess.half_width << '\n';
    out << "threshold_frac=" << g(model.meta.preprocess.threshold_frac) << '\n';
    out << "thickness_min_in=" << g(model.meta.thickness_min_in) << '\n';
    out << "thickness_max_in=" << g(model.meta.thickness_max_in) << '\n';

    out << "[kernel]\n";
    out << "type=" << kernel_name(model.kernel) << '\n';
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, RbfKernel>) {
                out << "gamma=" << g(k.gamma) << '\n';
            } else if constexpr (std::is_same_v<K, AnisotropicRbfKernel>) {
                out << "gamma=";
                for (Eigen::Index a = 0; a < k.gamma.size(); ++a) out << (a ? "," : "") << g(k.gamma(a));
                out << '\n';
            } else {
                out << "degree=" << k.degree << "\nscale=" << g(k.scale) << "\noffset=" << g(k.offset) << '\n';
            }
        },
        model.kernel);

    out << "[scaler]\n";
    out << "time=" << g(model.scaler.time.offset) << ' ' << g(model.scaler.time.step) << '\n';
    out << "thickness=" << g(model.scaler.thickness.offset) << ' ' << g(model.scaler.thickness.step) << '\n';
    out << "velocity=" << g(model.scaler.velocity.offset) << ' ' << g(model.scaler.velocity.step) << '\n';

    out << "[coefficients]\n";
    out << "count=" << model.coefficients.size() << '\n';
    out << "bias=" << g(model.bias) << '\n';
    for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) out << g(model.coefficients(i)) << '\n';

    out << "[support_vectors]\n";
    out << "count=" << model.support_vectors.rows() << '\n';
    for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
        out << g(model.support_vectors(i, 0)) << ' ' << g(model.support_vectors(i, 1)) << '\n';
    }
    return out.str();
}

[[noreturn]] void malformed(const std::string& what) {
    throw FormatError(FormatError::Kind::malformed, "model file: " + what);
}

double number(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) malformed("missing key '" + key + "'");
    const auto v = io::parse_double(it->second);
    if (!v) malformed("bad number for '" + key + "'");
    return *v;
}

std::size_t count(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) malformed("missing key '" + key + "'");
    const auto v = io::parse_integer<std::size_t>(it->second);
    if (!v) malformed("bad integer for '" + key + "'");
    return *v;
}

AxisMap axis(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) malformed("missing scaler axis '" + key + "'");
    const auto parts = io::split(it->second, ' ');
    if (parts.size() != 2) malformed("bad scaler axis '" + key + "'");
    const auto a = io::parse_double(parts[0]);
    const auto b = io::parse_double(parts[1]);
    if (!a || !b) malformed("bad scaler axis '" + key + "'");
    return {*a, *b};
}

}  // namespace

std::uint64_t SvrModel::fingerprint() const {
    Fnv1a64 hash;
    hash.update(body_text(*this));
    return hash.digest();
}

void save_model(std::ostream& out, const SvrModel& model) {
    std::string text = std::string(kMagic) + " " + std::to_string(kModelFormatVersion) + "\n" + body_text(model);
    Fnv1a64 hash;
    hash.update(text);
    out << text << kChecksumPrefix << to_hex(hash.digest()) << '\n';
}

SvrModel load_model(std::istream& in) {
    const std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (content.empty()) throw FormatError(FormatError::Kind::truncated, "model file is empty");

    const auto first_nl = content.find('\n');
    const std::string_view first_line = io::trim(std::string_view(content).substr(0, first_nl));
    const auto head = io::split(first_line, ' ');
    if (head.size() != 2 || head[0] != kMagic) malformed("missing '" + std::string(kMagic) + "' header");
    if (head[1] != std::to_string(kModelFormatVersion)) {
        throw FormatError(FormatError::Kind::version,
                          "model file version '" + std::string(head[1]) + "' is not supported (expected " +
                              std::to_string(kModelFormatVersion) + ")");
    }

    const auto checksum_pos = content.rfind(kChecksumPrefix);
    if (checksum_pos == std::string::npos || (checksum_pos > 0 && content[checksum_pos - 1] != '\n')) {
        throw FormatError(FormatError::Kind::truncated, "model file has no checksum line (truncated?)");
    }
    const std::string_view recorded =
        io::trim(std::string_view(content).substr(checksum_pos + kChecksumPrefix.size()));
    Fnv1a64 hash;
    hash.update(std::string_view(content).substr(0, checksum_pos));
    if (recorded != to_hex(hash.digest())) {
        throw FormatError(FormatError::Kind::checksum, "model file checksum mismatch (corrupted content)");
    }

    // Checksum verified: parse sections.
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::vector<std::string> coefficient_lines;
    std::vector<std::string> sv_lines;
    std::string section;
    std::istringstream body(content.substr(first_nl + 1, checksum_pos - first_nl - 1));
    std::string line;
    while (std::getline(body, line)) {
        const std::string_view text = io::trim(line);
        if (text.empty()) continue;
        if (text.front() == '[') {
            section = std::string(text);
            continue;
        }
        const auto eq = text.find('=');
        if (eq != std::string_view::npos) {
            sections[section][std::string(text.substr(0, eq))] = std::string(text.substr(eq + 1));
        } else if (section == "[coefficients]") {
            coefficient_lines.emplace_back(text);
        } else if (section == "[support_vectors]") {
            sv_lines.emplace_back(text);
        } else {
            malformed("unexpected line '" + std::string(text) + "'");
        }
    }

    SvrModel model;
    const auto& meta = sections["[meta]"];
    model.meta.n_train = count(meta, "n_train");
    model.meta.converged = count(meta, "converged") != 0;
    model.meta.objective = number(meta, "objective");
    model.meta.iterations = count(meta, "iterations");
    model.meta.solver.C = number(meta, "C");
    model.meta.solver.epsilon = number(meta, "epsilon");
    model.meta.solver.tolerance = number(meta, "tolerance");
    model.meta.solver.max_iterations = count(meta, "max_iterations");
    model.meta.solver.cache_budget_bytes = count(meta, "cache_budget_bytes");
    {
        const auto it = meta.find("dataset_fingerprint");
        if (it == meta.end()) malformed("missing key 'dataset_fingerprint'");
        model.meta.dataset_fingerprint = std::stoull(it->second, nullptr, 16);
    }
    model.meta.common_length = count(meta, "common_length");
    model.meta.preprocess.smooth = count(meta, "smooth") != 0;
    model.meta.preprocess.half_width = count(meta, "half_width");
    model.meta.preprocess.threshold_frac = number(meta, "threshold_frac");
    model.meta.thickness_min_in = number(meta, "thickness_min_in");
    model.meta.thickness_max_in = number(meta, "thickness_max_in");

    const auto& kernel = sections["[kernel]"];
    const auto type = kernel.find("type");
    if (type == kernel.end()) malformed("missing kernel type");
    if (type->second == "rbf") {
        model.kernel = RbfKernel{number(kernel, "gamma")};
    } else if (type->second == "arbf") {
        const auto gamma = kernel.find("gamma");
        if (gamma == kernel.end()) malformed("missing key 'gamma'");
        const auto parts = io::split(gamma->second, ',');
        AnisotropicRbfKernel k;
        k.gamma.resize(static_cast<Eigen::Index>(parts.size()));
        for (std::size_t a = 0; a < parts.size(); ++a) {
            const auto v = io::parse_double(parts[a]);
            if (!v) malformed("bad anisotropic gamma");
            k.gamma(static_cast<Eigen::Index>(a)) = *v;
        }
        model.kernel = k;
    } else if (type->second == "poly") {
        model.kernel = PolynomialKernel{static_cast<int>(count(kernel, "degree")), number(kernel, "scale"),
                                        number(kernel, "offset")};
    } else {
        malformed("unknown kernel type '" + type->second + "'");
    }
    try {
        validate_kernel(model.kernel);
    } catch (const std::invalid_argument& e) {
        malformed(e.what());
    }

    const auto& scaler = sections["[scaler]"];
    model.scaler.time = axis(scaler, "time");
    model.scaler.thickness = axis(scaler, "thickness");
    model.scaler.velocity = axis(scaler, "velocity");
    if (!model.scaler.valid()) malformed("invalid scaler");

    const auto& coefficients = sections["[coefficients]"];
    const std::size_t n_coef = count(coefficients, "count");
    model.bias = number(coefficients, "bias");
    if (coefficient_lines.size() != n_coef) {
        throw FormatError(FormatError::Kind::truncated, "model file: coefficient count mismatch");
    }
    model.coefficients.resize(static_cast<Eigen::Index>(n_coef));
    for (std::size_t i = 0; i < n_coef; ++i) {
        const auto v = io::parse_double(coefficient_lines[i]);
        if (!v) malformed("bad coefficient");
        model.coefficients(static_cast<Eigen::Index>(i)) = *v;
    }

    const std::size_t n_sv = count(sections["[support_vectors]"], "count");
    if (n_sv != n_coef || sv_lines.size() != n_sv) {
        throw FormatError(FormatError::Kind::truncated, "model file: support-vector count mismatch");
    }
    model.support_vectors.resize(static_cast<Eigen::Index>(n_sv), 2);
    for (std::size_t i = 0; i < n_sv; ++i) {
        const auto parts = io::split(sv_lines[i], ' ');
        const auto a = parts.size() == 2 ? io::parse_double(parts[0]) : std::nullopt;
        const auto b = parts.size() == 2 ? io::parse_double(parts[1]) : std::nullopt;
        if (!a || !b) malformed("bad support vector");
        model.support_vectors(static_cast<Eigen::Index>(i), 0) = *a;
        model.support_vectors(static_cast<Eigen::Index>(i), 1) = *b;
    }
    return model;
}

void save_model(const std::filesystem::path& path, const SvrModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    save_model(out, model);
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

SvrModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return load_model(in);
}

}  // namespace velsurf
