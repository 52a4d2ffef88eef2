#include "velsurf/preprocess.hpp"

#include "io_util.hpp"
#include "velsurf/error.hpp"
#include "velsurf/hash.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace velsurf {

bool AxisScaler::valid() const noexcept {
    for (const AxisMap* axis : {&time, &thickness, &velocity}) {
        if (!std::isfinite(axis->offset) || !std::isfinite(axis->step) || !(axis->step > 0.0)) return false;
    }
    return true;
}

std::uint64_t ScaledDataset::fingerprint() const {
    Fnv1a64 hash;
    const auto n = static_cast<std::uint64_t>(size());
    hash.update(&n, sizeof n);
    hash.update(features.data(), sizeof(double) * static_cast<std::size_t>(features.size()));
    hash.update(targets.data(), sizeof(double) * static_cast<std::size_t>(targets.size()));
    return hash.digest();
}

ScaledDataset ScaledDataset::subset(std::span<const std::size_t> rows) const {
    const auto count = static_cast<Eigen::Index>(rows.size());
    ScaledDataset out;
    out.features.resize(count, 2);
    out.targets.resize(count);
    out.provenance.reserve(rows.size());
    for (Eigen::Index r = 0; r < count; ++r) {
        const std::size_t src = rows[static_cast<std::size_t>(r)];
        if (src >= size()) throw std::out_of_range("ScaledDataset::subset: row index out of range");
        out.features.row(r) = features.row(static_cast<Eigen::Index>(src));
        out.targets(r) = targets(static_cast<Eigen::Index>(src));
        out.provenance.push_back(provenance[src]);
    }
    out.scaler = scaler;
    out.experiment_ids = experiment_ids;
    out.thickness_in = thickness_in;
    out.common_length = common_length;
    out.preprocess = preprocess;
    return out;
}

std::vector<double> smooth_triangular(std::span<const double> values, std::size_t half_width) {
    if (values.empty()) throw std::invalid_argument("smooth_triangular: empty sequence");
    const std::size_t n = values.size();
    std::vector<double> out(n);
    const auto h = static_cast<std::ptrdiff_t>(half_width);
    for (std::size_t i = 0; i < n; ++i) {
        const auto center = static_cast<std::ptrdiff_t>(i);
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-h, -center);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(n) - 1 - center);
        double sum = 0.0;
        double weight_sum = 0.0;
        double v_min = values[i];
        double v_max = values[i];
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
            const double v = values[static_cast<std::size_t>(center + j)];
            const auto w = static_cast<double>(h + 1 - std::abs(j));
            sum += w * v;
            weight_sum += w;
            v_min = std::min(v_min, v);
            v_max = std::max(v_max, v);
        }
        // The exact weighted mean lies inside the window's range; clamping strips rounding
        // excursions, so constant runs come back bit-for-bit.
        out[i] = std::clamp(sum / weight_sum, v_min, v_max);
    }
    return out;
}

std::size_t detect_start_time(const ExperimentSeries& series, double threshold_frac) {
    if (series.velocities_mps.empty()) throw DataError("'" + series.id + "': empty series");
    if (series.t0_ns) {
        const double position = std::round((*series.t0_ns - series.time_origin_ns) / series.dt_ns);
        if (!(position >= 0.0) || position >= static_cast<double>(series.size())) {
            throw DataError("'" + series.id + "': t0_ns lies outside the recorded series");
        }
        return static_cast<std::size_t>(position);
    }
    if (!(threshold_frac > 0.0 && threshold_frac < 1.0)) {
        throw std::invalid_argument("detect_start_time: threshold must lie in (0, 1)");
    }
    double peak = 0.0;
    for (double v : series.velocities_mps) {
        if (std::isfinite(v)) peak = std::max(peak, v);
    }
    if (!(peak > 0.0)) throw DataError("'" + series.id + "': no onset (series has no positive peak)");
    const double level = threshold_frac * peak;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.velocities_mps[i] >= level) return i;
    }
    throw DataError("'" + series.id + "': no onset");  // unreachable: the peak itself qualifies
}

AlignedDataset align_and_truncate(const RawDataset& dataset, double threshold_frac) {
    if (dataset.experiments.empty()) throw DataError("no experiments");
    const double dt = dataset.experiments.front().dt_ns;
    for (const auto& s : dataset.experiments) {
        if (std::abs(s.dt_ns - dt) > 1e-12 * dt) {
            throw DataError("mixed dt: '" + s.id + "' has dt_ns=" + io::format_shortest(s.dt_ns) + ", expected " +
                            io::format_shortest(dt));
        }
    }

    AlignedDataset aligned;
    std::size_t common = static_cast<std::size_t>(-1);
    for (const auto& s : dataset.experiments) {
        const std::size_t onset = detect_start_time(s, threshold_frac);
        aligned.onset_index.push_back(onset);
        aligned.onset_time_ns.push_back(s.time_ns(onset));
        common = std::min(common, s.size() - onset);
    }
    aligned.common_length = common;
    for (std::size_t e = 0; e < dataset.experiments.size(); ++e) {
        const auto& s = dataset.experiments[e];
        ExperimentSeries out;
        out.id = s.id;
        out.thickness_in = s.thickness_in;
        out.dt_ns = s.dt_ns;
        out.time_origin_ns = aligned.onset_time_ns[e];
        out.t0_ns = out.time_origin_ns;
        const auto first = s.velocities_mps.begin() + static_cast<std::ptrdiff_t>(aligned.onset_index[e]);
        out.velocities_mps.assign(first, first + static_cast<std::ptrdiff_t>(common));
        aligned.experiments.push_back(std::move(out));
    }
    return aligned;
}

namespace {

void fill_points(const AlignedDataset& aligned, ScaledDataset& out, bool exact_time_index) {
    const std::size_t n_exp = aligned.experiments.size();
    const std::size_t len = aligned.common_length;
    const auto n = static_cast<Eigen::Index>(n_exp * len);
    out.features.resize(n, 2);
    out.targets.resize(n);
    out.provenance.clear();
    out.provenance.reserve(static_cast<std::size_t>(n));
    out.experiment_ids.clear();
    out.thickness_in.clear();
    out.common_length = len;
    Eigen::Index row = 0;
    for (std::size_t e = 0; e < n_exp; ++e) {
        const auto& s = aligned.experiments[e];
        if (s.size() < len) throw DataError("'" + s.id + "': shorter than the common length");
        out.experiment_ids.push_back(s.id);
        out.thickness_in.push_back(s.thickness_in);
        const double w = out.scaler.thickness.forward(s.thickness_in);
        for (std::size_t i = 0; i < len; ++i, ++row) {
            const double v = s.velocities_mps[i];
            if (!std::isfinite(v)) throw DataError("'" + s.id + "': non-finite velocity at index " + std::to_string(i));
            out.features(row, 0) = exact_time_index ? static_cast<double>(i)
                                                    : out.scaler.time.forward(static_cast<double>(i) * s.dt_ns);
            out.features(row, 1) = w;
            out.targets(row) = out.scaler.velocity.forward(v);
            out.provenance.push_back({e, i});
        }
    }
}

}  // namespace

ScaledDataset scale_to_unit_grid(const AlignedDataset& aligned) {
    if (aligned.experiments.empty() || aligned.common_length == 0) throw DataError("empty aligned dataset");

    std::vector<double> thickness;
    for (const auto& s : aligned.experiments) thickness.push_back(s.thickness_in);
    std::sort(thickness.begin(), thickness.end());
    thickness.erase(std::unique(thickness.begin(), thickness.end()), thickness.end());
    if (thickness.size() < 2) throw DataError("unit-grid scaling needs at least 2 distinct thicknesses");

    std::vector<double> gaps;
    for (std::size_t i = 1; i < thickness.size(); ++i) gaps.push_back(thickness[i] - thickness[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    const std::size_t mid = gaps.size() / 2;
    const double median_gap = gaps.size() % 2 == 1 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);

    double v_min = std::numeric_limits<double>::infinity();
    double v_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : aligned.experiments) {
        for (std::size_t i = 0; i < aligned.common_length && i < s.size(); ++i) {
            v_min = std::min(v_min, s.velocities_mps[i]);
            v_max = std::max(v_max, s.velocities_mps[i]);
        }
    }

    ScaledDataset out;
    out.scaler.time = {0.0, aligned.experiments.front().dt_ns};
    out.scaler.thickness = {thickness.front(), median_gap};
    // A flat dataset keeps a unit step so the map stays invertible.
    out.scaler.velocity = {v_min, v_max > v_min ? v_max - v_min : 1.0};
    if (!out.scaler.valid()) throw DataError("cannot build a valid scaler (non-finite data?)");
    fill_points(aligned, out, true);
    return out;
}

ScaledDataset apply_scaler(const AlignedDataset& aligned, const AxisScaler& scaler) {
    if (!scaler.valid()) throw std::invalid_argument("apply_scaler: invalid scaler");
    ScaledDataset out;
    out.scaler = scaler;
    fill_points(aligned, out, false);
    return out;
}

RawDataset smooth_dataset(const RawDataset& dataset, std::size_t half_width) {
    RawDataset out = dataset;
    for (auto& s : out.experiments) s.velocities_mps = smooth_triangular(s.velocities_mps, half_width);
    return out;
}

AlignedDataset prepare(const RawDataset& dataset, const PreprocessOptions& options) {
    if (options.smooth) return align_and_truncate(smooth_dataset(dataset, options.half_width), options.threshold_frac);
    return align_and_truncate(dataset, options.threshold_frac);
}

ScaledDataset preprocess(const RawDataset& dataset, const PreprocessOptions& options) {
    ScaledDataset out = scale_to_unit_grid(prepare(dataset, options));
    out.preprocess = options;
    return out;
}

namespace {

constexpr std::string_view kScaledMagic = "velsurf-scaled-dataset";

std::pair<double, double> parse_pair(std::string_view text, std::size_t line) {
    const auto parts = io::split(text, ',');
    if (parts.size() != 2) throw ParseError(line, "expected 'offset,step'");
    const auto a = io::parse_double(parts[0]);
    const auto b = io::parse_double(parts[1]);
    if (!a || !b) throw ParseError(line, "non-numeric scaler value");
    return {*a, *b};
}

}  // namespace

void write_scaled_dataset(std::ostream& out, const ScaledDataset& data) {
    out << kScaledMagic << " 1\n";
    auto axis = [&](const char* name, const AxisMap& m) {
        out << "# scaler_" << name << '=' << io::format_g17(m.offset) << ',' << io::format_g17(m.step) << '\n';
    };
    axis("time", data.scaler.time);
    axis("thickness", data.scaler.thickness);
    axis("velocity", data.scaler.velocity);
    out << "# common_length=" << data.common_length << '\n';
    out << "# smooth=" << (data.preprocess.smooth ? 1 : 0) << '\n';
    out << "# half_width=" << data.preprocess.half_width << '\n';
    out << "# threshold_frac=" << io::format_g17(data.preprocess.threshold_frac) << '\n';
    for (std::size_t e = 0; e < data.experiment_ids.size(); ++e) {
        out << "# experiment=" << e << ',' << data.experiment_ids[e] << ',' << io::format_g17(data.thickness_in[e]) << '\n';
    }
    out << "experiment,sample,t,w,v\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << data.provenance[i].experiment << ',' << data.provenance[i].sample << ',' << io::format_g17(data.features(r, 0))
            << ',' << io::format_g17(data.features(r, 1)) << ',' << io::format_g17(data.targets(r)) << '\n';
    }
}

ScaledDataset read_scaled_dataset(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw FormatError(FormatError::Kind::truncated, "empty scaled-dataset file");
    {
        const auto parts = io::split(io::trim(line), ' ');
        if (parts.size() != 2 || parts[0] != kScaledMagic) {
            throw FormatError(FormatError::Kind::malformed, "not a scaled-dataset file");
        }
        if (parts[1] != "1") throw FormatError(FormatError::Kind::version, "unsupported scaled-dataset version");
    }
    ScaledDataset data;
    std::vector<std::array<double, 3>> rows;
    std::vector<PointSource> sources;
    bool have_time = false, have_thickness = false, have_velocity = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = io::trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const std::string_view entry = io::trim(text.substr(1));
            const auto eq = entry.find('=');
            if (eq == std::string_view::npos) throw ParseError(line_no, "malformed header");
            const std::string_view key = entry.substr(0, eq);
            const std::string_view value = entry.substr(eq + 1);
            if (key == "scaler_time" || key == "scaler_thickness" || key == "scaler_velocity") {
                const auto [offset, step] = parse_pair(value, line_no);
                AxisMap& m = key == "scaler_time" ? data.scaler.time
                             : key == "scaler_thickness" ? data.scaler.thickness
                                                         : data.scaler.velocity;
                m = {offset, step};
                (key == "scaler_time" ? have_time : key == "scaler_thickness" ? have_thickness : have_velocity) = true;
            } else if (key == "common_length") {
                const auto n = io::parse_integer<std::size_t>(value);
                if (!n) throw ParseError(line_no, "bad common_length");
                data.common_length = *n;
            } else if (key == "smooth" || key == "half_width") {
                const auto n = io::parse_integer<std::size_t>(value);
                if (!n) throw ParseError(line_no, "bad " + std::string(key));
                if (key == "smooth") {
                    data.preprocess.smooth = *n != 0;
                } else {
                    data.preprocess.half_width = *n;
                }
            } else if (key == "threshold_frac") {
                const auto x = io::parse_double(value);
                if (!x) throw ParseError(line_no, "bad threshold_frac");
                data.preprocess.threshold_frac = *x;
            } else if (key == "experiment") {
                const auto parts = io::split(value, ',');
                const auto index = parts.size() == 3 ? io::parse_integer<std::size_t>(parts[0]) : std::nullopt;
                const auto w = parts.size() == 3 ? io::parse_double(parts[2]) : std::nullopt;
                if (!index || !w || *index != data.experiment_ids.size()) throw ParseError(line_no, "bad experiment entry");
                data.experiment_ids.emplace_back(parts[1]);
                data.thickness_in.push_back(*w);
            }
            continue;
        }
        if (text == "experiment,sample,t,w,v") continue;
        const auto cells = io::split(text, ',');
        if (cells.size() != 5) throw ParseError(line_no, "expected 5 columns");
        const auto e = io::parse_integer<std::size_t>(cells[0]);
        const auto s = io::parse_integer<std::size_t>(cells[1]);
        const auto t = io::parse_double(cells[2]);
        const auto w = io::parse_double(cells[3]);
        const auto v = io::parse_double(cells[4]);
        if (!e || !s || !t || !w || !v) throw ParseError(line_no, "non-numeric cell");
        if (*e >= data.experiment_ids.size()) throw ParseError(line_no, "unknown experiment index");
        rows.push_back({*t, *w, *v});
        sources.push_back({*e, *s});
    }
    if (!have_time || !have_thickness || !have_velocity) {
        throw FormatError(FormatError::Kind::truncated, "scaled-dataset file lacks scaler entries");
    }
    if (!data.scaler.valid()) throw FormatError(FormatError::Kind::malformed, "invalid scaler in scaled-dataset file");
    if (rows.empty()) throw FormatError(FormatError::Kind::truncated, "scaled-dataset file has no points");
    const auto n = static_cast<Eigen::Index>(rows.size());
    data.features.resize(n, 2);
    data.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        data.features(i, 0) = r[0];
        data.features(i, 1) = r[1];
        data.targets(i) = r[2];
    }
    data.provenance = std::move(sources);
    return data;
}

}  // namespace velsurf
