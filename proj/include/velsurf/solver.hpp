#pragma once

#include "velsurf/kernels.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace velsurf {

/// Dual-problem settings. `C` bounds every |beta_i|; it plays the role of 1/lambda in the
/// regularised-risk form of the problem.
struct SolverConfig {
    double C = 1.0;
    double epsilon = 0.001;
    double tolerance = 1e-3;
    std::size_t max_iterations = 10'000'000;
    std::size_t cache_budget_bytes = std::size_t{256} << 20;
    bool record_objective = false;

    void validate() const;
};

/// Solution of the epsilon-SVR dual in net-coefficient form (beta_i = alpha_i - alpha_i^*).
struct DualSolution {
    Eigen::VectorXd beta;
    double bias = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Dual objective after each pair update; filled only when SolverConfig::record_objective is set.
    std::vector<double> objective_trace;
};

/// Sequential minimal optimisation on the dual
///
///   max  -1/2 b'Kb - eps * |b|_1 + y'b   s.t.  sum(b) = 0,  |b_i| <= C.
///
/// Each step updates the maximal KKT-violating pair (lowest index wins ties) and solves the
/// piecewise-quadratic line search through the kinks of |b| exactly. Deterministic.
DualSolution solve_epsilon_svr(const Eigen::Ref<const Eigen::MatrixXd>& points,
                               const Eigen::Ref<const Eigen::VectorXd>& targets, const Kernel& kernel,
                               const SolverConfig& config);

/// Dense reference solver for small instances: accelerated projected-gradient ascent on the
/// split (alpha, alpha^*) form of the same dual. Independent of the SMO path; meant for tests
/// and verification only.
DualSolution solve_qp_reference(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                const Eigen::Ref<const Eigen::VectorXd>& targets, const Kernel& kernel,
                                const SolverConfig& config);

inline constexpr std::size_t kReferenceSolverMaxPoints = 200;

/// Largest violation of the optimality conditions, max(0, max_up - min_down), where up/down
/// are the one-sided dual derivatives of coefficients that can still move in that direction.
double kkt_violation(const DualSolution& solution, const Eigen::Ref<const Eigen::MatrixXd>& points,
                     const Eigen::Ref<const Eigen::VectorXd>& targets, const Kernel& kernel,
                     const SolverConfig& config);

/// Dual objective of an arbitrary coefficient vector.
double dual_objective(const Eigen::Ref<const Eigen::VectorXd>& beta, const Eigen::Ref<const Eigen::MatrixXd>& gram,
                      const Eigen::Ref<const Eigen::VectorXd>& targets, double epsilon);

}  // namespace velsurf
