#pragma once

#include "velsurf/kernels.hpp"
#include "velsurf/preprocess.hpp"
#include "velsurf/solver.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace velsurf {

struct HyperParams {
    Kernel kernel = RbfKernel{0.1};
    double C = 1.0;
    double epsilon = 0.001;

    static HyperParams rbf(double gamma, double C, double epsilon) { return {RbfKernel{gamma}, C, epsilon}; }
    void validate() const;
};

struct TrainingMeta {
    std::size_t n_train = 0;
    bool converged = false;
    double objective = 0.0;
    std::size_t iterations = 0;
    SolverConfig solver;
    std::uint64_t dataset_fingerprint = 0;
    std::size_t common_length = 0;
    PreprocessOptions preprocess;
    double thickness_min_in = 0.0;  ///< range of the training thicknesses
    double thickness_max_in = 0.0;
};

/// Trained regressor f(x) = sum_i coef_i K(sv_i, x) + bias over unit-grid coordinates.
/// Carries its scaler so it can answer queries in physical units on its own.
struct SvrModel {
    Eigen::MatrixX2d support_vectors;
    Eigen::VectorXd coefficients;
    double bias = 0.0;
    Kernel kernel = RbfKernel{0.1};
    AxisScaler scaler;
    TrainingMeta meta;

    std::size_t support_count() const noexcept { return static_cast<std::size_t>(coefficients.size()); }
    /// Hash of every numeric field; identifies the model in derived outputs.
    std::uint64_t fingerprint() const;
};

/// Solves the dual on the dataset and keeps only the points with non-zero coefficients.
/// Non-convergence is recorded in meta.converged rather than thrown.
SvrModel train(const ScaledDataset& data, const HyperParams& params, SolverConfig config = {});

double predict_scaled(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Scales (aligned time, thickness), evaluates, and maps the result back to m/s.
double predict_physical(const SvrModel& model, double time_ns, double thickness_in);

inline constexpr int kModelFormatVersion = 1;

void save_model(std::ostream& out, const SvrModel& model);
SvrModel load_model(std::istream& in);
void save_model(const std::filesystem::path& path, const SvrModel& model);
SvrModel load_model(const std::filesystem::path& path);

}  // namespace velsurf
