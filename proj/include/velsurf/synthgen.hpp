#pragma once

#include "velsurf/data_model.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace velsurf {

/// Affine law value(w) = at_ref + slope * (w - reference thickness).
struct AffineLaw {
    double at_ref = 0.0;
    double slope = 0.0;

    double operator()(double w, double w_ref) const noexcept { return at_ref + slope * (w - w_ref); }
};

/// Rise-plateau profile with decaying ringing and multiplicative Gaussian noise:
///
///   v(t) = peak(w) * S((t - t0(w)) / rise(w)) * [1 + a * sin(2 pi t / period) * exp(-decay(w) t)]
///
/// S is a C-infinity unit step (0 for x <= 0, 1 for x >= 1). The shape resembles free-surface
/// velocity records; it makes no claim of physical fidelity.
struct SynthConfig {
    std::vector<double> thicknesses_in{0.25, 0.3125, 0.375, 0.4375, 0.5};
    std::size_t n_steps = 1656;
    double dt_ns = 2.0;
    double reference_thickness_in = 0.25;
    AffineLaw peak_mps{1800.0, -800.0};
    AffineLaw onset_ns{150.0, 800.0};
    AffineLaw rise_ns{150.0, 40.0};
    AffineLaw decay_per_ns{0.003, 0.002};
    double ringing_amplitude = 0.05;
    double ringing_period_ns = 400.0;
    double noise_rel = 0.04;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Noiseless v(t, w) for any thickness, t in ns on the generator clock.
double ground_truth_velocity(const SynthConfig& config, double time_ns, double thickness_in);

ExperimentSeries generate_profile(double thickness_in, const SynthConfig& config, bool noiseless = false);

struct SynthDataset {
    RawDataset data;
    std::function<double(double time_ns, double thickness_in)> truth;
};

SynthDataset generate_dataset(const SynthConfig& config);

}  // namespace velsurf
