#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace velsurf {

/// exp(-gamma * |x - y|^2)
struct RbfKernel {
    double gamma = 0.1;
};

/// exp(-sum_a gamma_a * (x_a - y_a)^2). Our reading of an "elliptical" RBF whose
/// iso-contours are axis-aligned ellipses.
struct AnisotropicRbfKernel {
    Eigen::VectorXd gamma;
};

/// (scale * <x, y> + offset)^degree
struct PolynomialKernel {
    int degree = 2;
    double scale = 1.0;
    double offset = 1.0;
};

using Kernel = std::variant<RbfKernel, AnisotropicRbfKernel, PolynomialKernel>;

/// Throws std::invalid_argument when parameters are out of range.
void validate_kernel(const Kernel& kernel);

/// Short tag used in files and on the command line: "rbf", "arbf" or "poly".
std::string kernel_name(const Kernel& kernel);

namespace detail {

// exp(-q) is exactly zero in double precision beyond this point, so skipping the
// call changes nothing.
inline constexpr double kExpUnderflow = 746.0;

inline double exp_neg(double q) noexcept { return q > kExpUnderflow ? 0.0 : std::exp(-q); }

}  // namespace detail

/// Evaluates the kernel on two feature vectors of equal dimension.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar kernel_eval(const Kernel& kernel, const Eigen::MatrixBase<DerivedX>& x,
                                      const Eigen::MatrixBase<DerivedY>& y) {
    using Scalar = typename DerivedX::Scalar;
    if (x.size() != y.size()) {
        throw std::invalid_argument("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
    const Eigen::Index dim = x.size();
    return std::visit(
        [&](const auto& k) -> Scalar {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, PolynomialKernel>) {
                double dot = 0.0;
                for (Eigen::Index a = 0; a < dim; ++a) dot += static_cast<double>(x(a)) * static_cast<double>(y(a));
                return static_cast<Scalar>(std::pow(k.scale * dot + k.offset, k.degree));
            } else {
                if constexpr (std::is_same_v<K, AnisotropicRbfKernel>) {
                    if (k.gamma.size() != dim) {
                        throw std::invalid_argument("kernel_eval: anisotropic gamma has wrong dimension");
                    }
                }
                double q = 0.0;
                for (Eigen::Index a = 0; a < dim; ++a) {
                    const double d = static_cast<double>(x(a)) - static_cast<double>(y(a));
                    if constexpr (std::is_same_v<K, RbfKernel>) {
                        q += d * d;
                    } else {
                        q += k.gamma(a) * d * d;
                    }
                }
                if constexpr (std::is_same_v<K, RbfKernel>) q *= k.gamma;
                return static_cast<Scalar>(detail::exp_neg(q));
            }
        },
        kernel);
}

/// Dense Gram matrix over the rows of `points`; each (i <= j) entry is computed once and mirrored.
Eigen::MatrixXd gram_matrix(const Kernel& kernel, const Eigen::Ref<const Eigen::MatrixXd>& points);

/// Row-wise Gram cache with least-recently-used eviction.
///
/// Rows are handed out as shared pointers so an evicted row stays alive for as long as a
/// caller holds it. All members are safe to call from several threads.
class KernelRowCache {
public:
    using Row = std::shared_ptr<const Eigen::VectorXd>;

    KernelRowCache(Kernel kernel, Eigen::MatrixXd points, std::size_t budget_bytes);

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }

    Row row(std::size_t i);
    double diagonal(std::size_t i) const noexcept { return diagonal_[static_cast<Eigen::Index>(i)]; }

    std::size_t hits() const;
    std::size_t misses() const;

private:
    Eigen::VectorXd compute_row(std::size_t i) const;

    Kernel kernel_;
    Eigen::MatrixXd points_;
    Eigen::VectorXd diagonal_;
    std::size_t capacity_rows_;

    mutable std::mutex mutex_;
    std::list<std::size_t> lru_;  // front = most recent
    struct Slot {
        Row row;
        std::list<std::size_t>::iterator position;
    };
    std::vector<Slot> slots_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace velsurf
