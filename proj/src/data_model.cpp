#include "velsurf/data_model.hpp"

#include "io_util.hpp"
#include "velsurf/error.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace velsurf {

std::vector<DataPoint> ExperimentSeries::points() const {
    std::vector<DataPoint> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        out.push_back({time_ns(i) * 1e-9, thickness_in, velocities_mps[i]});
    }
    return out;
}

bool ValidationReport::has_errors() const noexcept {
    for (const auto& issue : issues) {
        if (issue.severity == Severity::error) return true;
    }
    return false;
}

namespace {

bool valid_id(std::string_view id) {
    return !id.empty() && id.find_first_of(",\n\r") == std::string_view::npos;
}

}  // namespace

ExperimentSeries parse_experiment(std::istream& in, const std::string& default_id) {
    ExperimentSeries series;
    series.id = default_id;
    std::optional<double> thickness;
    std::optional<double> dt;
    std::optional<double> first_time;
    bool body_started = false;
    bool column_header_seen = false;
    std::size_t header_end_line = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = io::trim(line);
        if (text.empty()) continue;

        if (text.front() == '#') {
            if (body_started) throw ParseError(line_no, "malformed header: metadata after data rows");
            const std::string_view entry = io::trim(text.substr(1));
            const auto eq = entry.find('=');
            if (eq == std::string_view::npos || io::trim(entry.substr(0, eq)).empty()) {
                throw ParseError(line_no, "malformed header: expected '# key=value'");
            }
            const std::string key(io::trim(entry.substr(0, eq)));
            const std::string_view value = io::trim(entry.substr(eq + 1));
            auto number = [&]() {
                const auto parsed = io::parse_double(value);
                if (!parsed) throw ParseError(line_no, "malformed header: '" + key + "' is not a number");
                return *parsed;
            };
            if (key == "thickness_in") {
                thickness = number();
                if (!(*thickness > 0.0) || !std::isfinite(*thickness)) {
                    throw ParseError(line_no, "thickness must be positive");
                }
            } else if (key == "dt_ns") {
                dt = number();
                if (!(*dt > 0.0) || !std::isfinite(*dt)) throw ParseError(line_no, "dt must be positive");
            } else if (key == "t0_ns") {
                series.t0_ns = number();
            } else if (key == "id") {
                if (!valid_id(value)) throw ParseError(line_no, "malformed header: invalid id");
                series.id = std::string(value);
            }
            continue;
        }

        if (!body_started) {
            header_end_line = line_no;
            if (!thickness) throw ParseError(line_no, "missing required metadata key 'thickness_in'");
            if (!dt) throw ParseError(line_no, "missing required metadata key 'dt_ns'");
            if (!column_header_seen && text == "time_ns,velocity_mps") {
                column_header_seen = true;
                continue;
            }
            body_started = true;
        }

        const auto cells = io::split(text, ',');
        if (cells.size() != 2) {
            throw ParseError(line_no, "expected 2 columns (time_ns,velocity_mps), got " + std::to_string(cells.size()));
        }
        const auto time = io::parse_double(cells[0]);
        const auto velocity = io::parse_double(cells[1]);
        if (!time || !velocity) throw ParseError(line_no, "non-numeric cell");

        const std::size_t index = series.velocities_mps.size();
        if (!first_time) {
            first_time = *time;
        } else {
            const double expected = *first_time + static_cast<double>(index) * *dt;
            if (std::abs(*time - expected) > 1e-9 * std::max(std::abs(expected), *dt)) {
                throw ParseError(line_no, "time " + io::format_shortest(*time) + " inconsistent with dt_ns (expected " +
                                              io::format_shortest(expected) + ")");
            }
        }
        series.velocities_mps.push_back(*velocity);
    }

    if (!thickness) throw ParseError(line_no, "missing required metadata key 'thickness_in'");
    if (!dt) throw ParseError(line_no, "missing required metadata key 'dt_ns'");
    if (series.velocities_mps.empty()) throw ParseError(header_end_line ? header_end_line : line_no, "empty body");
    if (!valid_id(series.id)) throw ParseError(1, "missing experiment id");

    series.thickness_in = *thickness;
    series.dt_ns = *dt;
    series.time_origin_ns = *first_time;
    return series;
}

void write_experiment(std::ostream& out, const ExperimentSeries& series) {
    out << "# id=" << series.id << '\n';
    out << "# thickness_in=" << io::format_shortest(series.thickness_in) << '\n';
    out << "# dt_ns=" << io::format_shortest(series.dt_ns) << '\n';
    if (series.t0_ns) out << "# t0_ns=" << io::format_shortest(*series.t0_ns) << '\n';
    out << "time_ns,velocity_mps\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << io::format_shortest(series.time_ns(i)) << ',' << io::format_shortest(series.velocities_mps[i]) << '\n';
    }
}

ExperimentSeries read_experiment_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return parse_experiment(in, path.stem().string());
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail(), path.string());
    }
}

RawDataset load_dataset(std::span<const std::filesystem::path> paths) {
    if (paths.empty()) throw DataError("no experiments");
    RawDataset dataset;
    dataset.experiments.reserve(paths.size());
    std::set<std::string> ids;
    for (const auto& path : paths) {
        auto series = read_experiment_file(path);
        if (!ids.insert(series.id).second) throw DataError("duplicate experiment id '" + series.id + "'");
        for (const auto& other : dataset.experiments) {
            if (std::abs(other.thickness_in - series.thickness_in) <= 1e-12 * std::abs(series.thickness_in)) {
                throw DataError("duplicate thickness " + io::format_shortest(series.thickness_in) + " in '" + other.id +
                                "' and '" + series.id + "'");
            }
        }
        dataset.experiments.push_back(std::move(series));
    }
    return dataset;
}

ValidationReport validate_dataset(const RawDataset& dataset, const ValidationLimits& limits) {
    constexpr std::size_t kMaxIndexIssues = 20;
    ValidationReport report;
    auto add = [&](Severity severity, const std::string& id, std::string message) {
        report.issues.push_back({severity, id, std::move(message)});
    };

    if (dataset.experiments.size() < 2) {
        add(Severity::warning, "", "surface reconstruction needs at least 2 experiments, found " +
                                       std::to_string(dataset.experiments.size()));
    }

    std::set<std::string> ids;
    for (std::size_t e = 0; e < dataset.experiments.size(); ++e) {
        const auto& s = dataset.experiments[e];
        if (!ids.insert(s.id).second) add(Severity::error, s.id, "duplicate experiment id");
        for (std::size_t o = 0; o < e; ++o) {
            if (dataset.experiments[o].thickness_in == s.thickness_in) {
                add(Severity::error, s.id, "duplicate thickness shared with '" + dataset.experiments[o].id + "'");
            }
        }
        if (!std::isfinite(s.dt_ns) || !(s.dt_ns > 0.0)) {
            add(Severity::error, s.id, "non-monotone time axis (dt_ns=" + io::format_shortest(s.dt_ns) + ")");
        }
        if (!std::isfinite(s.time_origin_ns)) add(Severity::error, s.id, "non-finite time origin");
        if (!std::isfinite(s.thickness_in) || s.thickness_in < limits.min_thickness_in ||
            s.thickness_in > limits.max_thickness_in) {
            add(Severity::warning, s.id,
                "thickness " + io::format_shortest(s.thickness_in) + " in outside [" +
                    io::format_shortest(limits.min_thickness_in) + ", " + io::format_shortest(limits.max_thickness_in) + "]");
        }
        if (s.velocities_mps.empty()) {
            add(Severity::error, s.id, "empty series");
        } else if (s.size() < limits.min_length) {
            add(Severity::warning, s.id,
                "series has " + std::to_string(s.size()) + " points, minimum is " + std::to_string(limits.min_length));
        }
        std::size_t bad = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (std::isfinite(s.velocities_mps[i])) continue;
            if (++bad <= kMaxIndexIssues) add(Severity::error, s.id, "non-finite velocity at index " + std::to_string(i));
        }
        if (bad > kMaxIndexIssues) {
            add(Severity::error, s.id, std::to_string(bad - kMaxIndexIssues) + " further non-finite velocities");
        }
    }
    return report;
}

void write_validation_report(std::ostream& out, const ValidationReport& report) {
    out << "severity,experiment_id,message\n";
    for (const auto& issue : report.issues) {
        out << (issue.severity == Severity::error ? "error" : "warning") << ',' << issue.experiment_id << ",\"";
        for (char c : issue.message) out << (c == '"' ? "\"\"" : std::string(1, c));
        out << "\"\n";
    }
}

}  // namespace velsurf
