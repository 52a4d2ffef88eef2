#include "velsurf/synthgen.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace velsurf {

namespace {

// C-infinity step: 0 for x <= 0, 1 for x >= 1.
double smooth_step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / x);
    const double b = std::exp(-1.0 / (1.0 - x));
    return a / (a + b);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Box-Muller over raw engine output; std::normal_distribution is not portable bit-for-bit.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

void SynthConfig::validate() const {
    if (thicknesses_in.empty()) throw std::invalid_argument("synth: no thicknesses");
    if (n_steps == 0) throw std::invalid_argument("synth: n_steps must be positive");
    if (!(dt_ns > 0.0)) throw std::invalid_argument("synth: dt must be positive");
    if (!(ringing_period_ns > 0.0)) throw std::invalid_argument("synth: ringing period must be positive");
    if (!(ringing_amplitude >= 0.0 && ringing_amplitude < 1.0)) {
        throw std::invalid_argument("synth: ringing amplitude must lie in [0, 1)");
    }
    if (!(noise_rel >= 0.0 && noise_rel < 1.0)) throw std::invalid_argument("synth: noise_rel must lie in [0, 1)");
    for (double w : thicknesses_in) {
        const double r = reference_thickness_in;
        if (!(w > 0.0)) throw std::invalid_argument("synth: thickness must be positive");
        if (!(peak_mps(w, r) > 0.0)) throw std::invalid_argument("synth: peak velocity must be positive");
        if (!(rise_ns(w, r) > 0.0)) throw std::invalid_argument("synth: rise time must be positive");
        if (!(decay_per_ns(w, r) > 0.0)) throw std::invalid_argument("synth: decay rate must be positive");
        if (!(onset_ns(w, r) >= 0.0)) throw std::invalid_argument("synth: onset time must be non-negative");
    }
}

double ground_truth_velocity(const SynthConfig& config, double time_ns, double thickness_in) {
    const double r = config.reference_thickness_in;
    const double rise = smooth_step((time_ns - config.onset_ns(thickness_in, r)) / config.rise_ns(thickness_in, r));
    const double ringing = config.ringing_amplitude * std::sin(2.0 * std::numbers::pi * time_ns / config.ringing_period_ns) *
                           std::exp(-config.decay_per_ns(thickness_in, r) * time_ns);
    return config.peak_mps(thickness_in, r) * rise * (1.0 + ringing);
}

ExperimentSeries generate_profile(double thickness_in, const SynthConfig& config, bool noiseless) {
    config.validate();
    ExperimentSeries series;
    char id[48];
    std::snprintf(id, sizeof id, "synth_w%.4f", thickness_in);
    series.id = id;
    series.thickness_in = thickness_in;
    series.dt_ns = config.dt_ns;
    series.time_origin_ns = 0.0;
    series.velocities_mps.resize(config.n_steps);

    GaussianSource noise(splitmix64(config.seed ^ splitmix64(std::bit_cast<std::uint64_t>(thickness_in))));
    for (std::size_t i = 0; i < config.n_steps; ++i) {
        const double v = ground_truth_velocity(config, series.time_ns(i), thickness_in);
        const double z = noise.next();  // drawn even when unused so the stream is independent of noiseless
        series.velocities_mps[i] = noiseless ? v : v * (1.0 + config.noise_rel * z);
    }
    return series;
}

SynthDataset generate_dataset(const SynthConfig& config) {
    config.validate();
    SynthDataset out;
    for (double w : config.thicknesses_in) out.data.experiments.push_back(generate_profile(w, config, false));
    out.truth = [config](double time_ns, double thickness_in) {
        return ground_truth_velocity(config, time_ns, thickness_in);
    };
    return out;
}

}  // namespace velsurf
