#include "velsurf/solver.hpp"

#include "velsurf/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace velsurf {

void SolverConfig::validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("C must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be non-negative");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
}

double dual_objective(const Eigen::Ref<const Eigen::VectorXd>& beta, const Eigen::Ref<const Eigen::MatrixXd>& gram,
                      const Eigen::Ref<const Eigen::VectorXd>& targets, double epsilon) {
    return -0.5 * beta.dot(gram * beta) - epsilon * beta.lpNorm<1>() + targets.dot(beta);
}

namespace {

constexpr double kMinCurvature = 1e-12;

void check_inputs(const Eigen::Ref<const Eigen::MatrixXd>& points, const Eigen::Ref<const Eigen::VectorXd>& targets,
                  const Kernel& kernel, const SolverConfig& config) {
    if (points.rows() == 0) throw DataError("solver: empty training set");
    if (points.rows() != targets.size()) throw std::invalid_argument("solver: points/targets size mismatch");
    if (!targets.allFinite()) throw DataError("solver: non-finite target");
    if (!points.allFinite()) throw DataError("solver: non-finite feature");
    validate_kernel(kernel);
    config.validate();
}

// One-sided derivatives of the dual in coordinate k. `up` is the rate of gain when beta_k
// increases, `down` the derivative seen when it decreases; with gradient g = y - K beta.
inline double up_rate(double g, double beta, double eps) noexcept { return beta >= 0.0 ? g - eps : g + eps; }
inline double down_rate(double g, double beta, double eps) noexcept { return beta > 0.0 ? g - eps : g + eps; }

struct Interval {
    double up_max = -std::numeric_limits<double>::infinity();
    double down_min = std::numeric_limits<double>::infinity();
};

Interval kkt_interval(const Eigen::VectorXd& gradient, const Eigen::VectorXd& beta, double C, double eps) {
    Interval out;
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
        if (beta(k) < C) out.up_max = std::max(out.up_max, up_rate(gradient(k), beta(k), eps));
        if (beta(k) > -C) out.down_min = std::min(out.down_min, down_rate(gradient(k), beta(k), eps));
    }
    return out;
}

double bias_from_gradient(const Eigen::VectorXd& gradient, const Eigen::VectorXd& beta, double C, double eps) {
    double sum = 0.0;
    std::size_t free = 0;
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
        const double b = beta(k);
        if (b != 0.0 && std::abs(b) < C) {
            sum += gradient(k) - (b > 0.0 ? eps : -eps);
            ++free;
        }
    }
    if (free > 0) return sum / static_cast<double>(free);
    const Interval range = kkt_interval(gradient, beta, C, eps);
    if (!std::isfinite(range.up_max)) return range.down_min;
    if (!std::isfinite(range.down_min)) return range.up_max;
    return 0.5 * (range.up_max + range.down_min);
}

}  // namespace

DualSolution solve_epsilon_svr(const Eigen::Ref<const Eigen::MatrixXd>& points,
                               const Eigen::Ref<const Eigen::VectorXd>& targets, const Kernel& kernel,
                               const SolverConfig& config) {
    check_inputs(points, targets, kernel, config);
    const Eigen::Index n = points.rows();
    const double C = config.C;
    const double eps = config.epsilon;

    KernelRowCache cache(kernel, points, config.cache_budget_bytes);
    DualSolution sol;
    sol.beta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd gradient = targets;  // y - K beta
    Eigen::VectorXd& beta = sol.beta;
    double objective = 0.0;

    while (true) {
        // Working set: maximal violating pair, lowest index on ties.
        Eigen::Index i = -1;
        Eigen::Index j = -1;
        double up_max = -std::numeric_limits<double>::infinity();
        double down_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double b = beta(k);
            const double g = gradient(k);
            if (b < C) {
                const double up = up_rate(g, b, eps);
                if (up > up_max) {
                    up_max = up;
                    i = k;
                }
            }
            if (b > -C) {
                const double down = down_rate(g, b, eps);
                if (down < down_min) {
                    down_min = down;
                    j = k;
                }
            }
        }
        if (i < 0 || j < 0 || up_max - down_min <= config.tolerance) {
            sol.converged = true;
            break;
        }
        if (sol.iterations >= config.max_iterations) break;

        const auto row_i = cache.row(static_cast<std::size_t>(i));
        const auto row_j = cache.row(static_cast<std::size_t>(j));
        const double k_ii = cache.diagonal(static_cast<std::size_t>(i));
        const double k_jj = cache.diagonal(static_cast<std::size_t>(j));
        const double k_ij = (*row_i)(j);
        const double curvature = std::max(k_ii + k_jj - 2.0 * k_ij, kMinCurvature);

        // Move beta_i up and beta_j down by t in [0, t_max]. The objective along t is concave
        // and piecewise quadratic with kinks where either coefficient crosses zero.
        const double bi = beta(i);
        const double bj = beta(j);
        const double t_max = std::min(C - bi, bj + C);
        double kinks[2];
        int n_kinks = 0;
        if (bi < 0.0 && -bi < t_max) kinks[n_kinks++] = -bi;
        if (bj > 0.0 && bj < t_max) kinks[n_kinks++] = bj;
        if (n_kinks == 2 && kinks[1] < kinks[0]) std::swap(kinks[0], kinks[1]);

        const double g_diff = gradient(i) - gradient(j);
        double t = t_max;
        double seg_start = 0.0;
        for (int s = 0; s <= n_kinks; ++s) {
            const double seg_end = s < n_kinks ? kinks[s] : t_max;
            const double sign_i = (bi < 0.0 && seg_start < -bi) ? -1.0 : 1.0;
            const double sign_j = (bj > 0.0 && seg_start < bj) ? 1.0 : -1.0;
            const double stationary = (g_diff - eps * sign_i + eps * sign_j) / curvature;
            if (stationary <= seg_end) {
                t = std::max(stationary, seg_start);
                break;
            }
            seg_start = seg_end;
        }

        double new_bi = bi + t;
        double new_bj = bj - t;
        if (t == C - bi) new_bi = C;
        if (t == bj + C) new_bj = -C;
        const double di = new_bi - bi;
        const double dj = new_bj - bj;
        if (di == 0.0 && dj == 0.0) {
            throw NumericalError("SMO stalled: zero step on a violating pair");
        }
        beta(i) = new_bi;
        beta(j) = new_bj;

        const double gain = di * gradient(i) + dj * gradient(j) -
                            0.5 * (di * di * k_ii + dj * dj * k_jj + 2.0 * di * dj * k_ij) -
                            eps * (std::abs(new_bi) - std::abs(bi) + std::abs(new_bj) - std::abs(bj));
        objective += gain;
        gradient.noalias() -= di * (*row_i) + dj * (*row_j);
        ++sol.iterations;
        if (config.record_objective) sol.objective_trace.push_back(objective);

        assert(std::abs(beta.sum()) <= 1e-9 * static_cast<double>(n) * C);
        assert(std::abs(new_bi) <= C && std::abs(new_bj) <= C);
    }

    sol.bias = bias_from_gradient(gradient, beta, C, eps);
    // 1/2 b'(y + g) = y'b - 1/2 b'Kb
    sol.objective = 0.5 * beta.dot(targets + gradient) - eps * beta.lpNorm<1>();
    return sol;
}

double kkt_violation(const DualSolution& solution, const Eigen::Ref<const Eigen::MatrixXd>& points,
                     const Eigen::Ref<const Eigen::VectorXd>& targets, const Kernel& kernel,
                     const SolverConfig& config) {
    const Eigen::Index n = points.rows();
    if (solution.beta.size() != n || targets.size() != n) {
        throw std::invalid_argument("kkt_violation: size mismatch");
    }
    Eigen::VectorXd gradient = targets;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double b = solution.beta(j);
        if (b == 0.0) continue;
        for (Eigen::Index k = 0; k < n; ++k) gradient(k) -= b * kernel_eval(kernel, points.row(j), points.row(k));
    }
    const Interval range = kkt_interval(gradient, solution.beta, config.C, config.epsilon);
    if (!std::isfinite(range.up_max) || !std::isfinite(range.down_min)) return 0.0;
    return std::max(0.0, range.up_max - range.down_min);
}

// ---------------------------------------------------------------------------------------------
// Reference solver: split variables z = (alpha, alpha*) in [0, C]^2n with a'z = 0 where
// a = (1, ..., 1, -1, ..., -1). Objective
//   F(z) = -1/2 (alpha - alpha*)' K (alpha - alpha*) - eps * 1'(alpha + alpha*) + y'(alpha - alpha*).

namespace {

constexpr double kReferenceTolerance = 1e-10;
constexpr std::size_t kReferenceMaxIterations = 5'000'000;

// Euclidean projection onto {0 <= z <= C, sum(alpha) = sum(alpha*)}.
Eigen::VectorXd project_feasible(const Eigen::VectorXd& v, Eigen::Index n, double C) {
    auto excess = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            s += std::clamp(v(k) - mu, 0.0, C);
            s -= std::clamp(v(n + k) + mu, 0.0, C);
        }
        return s;
    };
    double lo = -(v.cwiseAbs().maxCoeff() + C);
    double hi = -lo;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    Eigen::VectorXd z(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        z(k) = std::clamp(v(k) - mu, 0.0, C);
        z(n + k) = std::clamp(v(n + k) + mu, 0.0, C);
    }
    return z;
}

struct SplitProblem {
    const Eigen::MatrixXd& gram;
    const Eigen::VectorXd& y;
    double eps;
    Eigen::Index n;

    double value(const Eigen::VectorXd& z) const {
        const Eigen::VectorXd b = z.head(n) - z.tail(n);
        return -0.5 * b.dot(gram * b) - eps * z.sum() + y.dot(b);
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
        const Eigen::VectorXd r = y - gram * (z.head(n) - z.tail(n));
        Eigen::VectorXd g(2 * n);
        g.head(n) = r.array() - eps;
        g.tail(n) = -r.array() - eps;
        return g;
    }
};

}  // namespace

DualSolution solve_qp_reference(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                const Eigen::Ref<const Eigen::VectorXd>& targets, const Kernel& kernel,
                                const SolverConfig& config) {
    check_inputs(points, targets, kernel, config);
    const Eigen::Index n = points.rows();
    if (static_cast<std::size_t>(n) > kReferenceSolverMaxPoints) {
        throw std::invalid_argument("solve_qp_reference: instance too large (" + std::to_string(n) + " > " +
                                    std::to_string(kReferenceSolverMaxPoints) + " points)");
    }
    const double C = config.C;
    const double eps = config.epsilon;
    const Eigen::MatrixXd gram = gram_matrix(kernel, points);
    const Eigen::VectorXd y = targets;
    const SplitProblem problem{gram, y, eps, n};

    const double lambda_max = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .maxCoeff();
    const double lipschitz = std::max(2.0 * lambda_max, 1e-12);
    const double step = 1.0 / lipschitz;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * n);
    Eigen::VectorXd momentum = z;
    double t = 1.0;
    double value = problem.value(z);
    DualSolution sol;
    for (; sol.iterations < kReferenceMaxIterations; ++sol.iterations) {
        const Eigen::VectorXd mapped = project_feasible(z + step * problem.gradient(z), n, C);
        if (lipschitz * (mapped - z).lpNorm<Eigen::Infinity>() <= kReferenceTolerance) {
            sol.converged = true;
            break;
        }
        const Eigen::VectorXd next = project_feasible(momentum + step * problem.gradient(momentum), n, C);
        const double next_value = problem.value(next);
        if (next_value < value) {
            // Adaptive restart: drop momentum and take a plain projected-gradient step.
            t = 1.0;
            momentum = z;
            z = mapped;
            value = problem.value(z);
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        momentum = next + ((t - 1.0) / t_next) * (next - z);
        z = next;
        value = next_value;
        t = t_next;
    }

    // The projection leaves round-off residue near the bounds; snap it so that the
    // free/bound classification below matches the exact solution.
    const double snap = 1e-12 * C;
    for (Eigen::Index k = 0; k < 2 * n; ++k) {
        if (z(k) < snap) z(k) = 0.0;
        if (z(k) > C - snap) z(k) = C;
    }
    const Eigen::VectorXd alpha = z.head(n);
    const Eigen::VectorXd alpha_star = z.tail(n);
    sol.beta = alpha - alpha_star;
    sol.objective = dual_objective(sol.beta, gram, y, eps);

    // Bias from the split-form optimality conditions on r = y - K beta.
    const Eigen::VectorXd r = y - gram * sol.beta;
    double sum = 0.0;
    std::size_t free = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
        if (alpha(k) > 0.0 && alpha(k) < C) {
            sum += r(k) - eps;
            ++free;
        }
        if (alpha_star(k) > 0.0 && alpha_star(k) < C) {
            sum += r(k) + eps;
            ++free;
        }
        if (alpha(k) == 0.0) lower = std::max(lower, r(k) - eps);
        if (alpha(k) == C) upper = std::min(upper, r(k) - eps);
        if (alpha_star(k) == 0.0) upper = std::min(upper, r(k) + eps);
        if (alpha_star(k) == C) lower = std::max(lower, r(k) + eps);
    }
    if (free > 0) {
        sol.bias = sum / static_cast<double>(free);
    } else if (std::isfinite(lower) && std::isfinite(upper)) {
        sol.bias = 0.5 * (lower + upper);
    } else {
        sol.bias = std::isfinite(lower) ? lower : upper;
    }
    return sol;
}

}  // namespace velsurf
