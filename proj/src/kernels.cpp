#include "velsurf/kernels.hpp"

#include <cmath>

namespace velsurf {

void validate_kernel(const Kernel& kernel) {
    std::visit(
        [](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, RbfKernel>) {
                if (!(k.gamma > 0.0) || !std::isfinite(k.gamma)) throw std::invalid_argument("rbf gamma must be positive");
            } else if constexpr (std::is_same_v<K, AnisotropicRbfKernel>) {
                if (k.gamma.size() == 0) throw std::invalid_argument("anisotropic rbf needs per-axis gammas");
                for (Eigen::Index a = 0; a < k.gamma.size(); ++a) {
                    if (!(k.gamma(a) > 0.0) || !std::isfinite(k.gamma(a))) {
                        throw std::invalid_argument("every anisotropic gamma must be positive");
                    }
                }
            } else {
                if (k.degree < 1) throw std::invalid_argument("polynomial degree must be >= 1");
                if (!std::isfinite(k.scale) || !std::isfinite(k.offset)) {
                    throw std::invalid_argument("polynomial scale/offset must be finite");
                }
            }
        },
        kernel);
}

std::string kernel_name(const Kernel& kernel) {
    switch (kernel.index()) {
        case 0: return "rbf";
        case 1: return "arbf";
        default: return "poly";
    }
}

Eigen::MatrixXd gram_matrix(const Kernel& kernel, const Eigen::Ref<const Eigen::MatrixXd>& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double value = kernel_eval(kernel, points.row(i), points.row(j));
            gram(i, j) = value;
            gram(j, i) = value;
        }
    }
    return gram;
}

KernelRowCache::KernelRowCache(Kernel kernel, Eigen::MatrixXd points, std::size_t budget_bytes)
    : kernel_(std::move(kernel)), points_(std::move(points)), slots_(static_cast<std::size_t>(points_.rows())) {
    validate_kernel(kernel_);
    const Eigen::Index n = points_.rows();
    diagonal_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) diagonal_(i) = kernel_eval(kernel_, points_.row(i), points_.row(i));
    const std::size_t row_bytes = sizeof(double) * static_cast<std::size_t>(std::max<Eigen::Index>(n, 1));
    // Two rows must always fit: the solver holds a pair at a time.
    capacity_rows_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
}

KernelRowCache::Row KernelRowCache::row(std::size_t i) {
    {
        std::lock_guard lock(mutex_);
        Slot& slot = slots_[i];
        if (slot.row) {
            ++hits_;
            lru_.splice(lru_.begin(), lru_, slot.position);
            return slot.row;
        }
        ++misses_;
    }
    auto computed = std::make_shared<const Eigen::VectorXd>(compute_row(i));
    std::lock_guard lock(mutex_);
    Slot& slot = slots_[i];
    if (slot.row) return slot.row;  // another thread inserted it meanwhile
    while (lru_.size() >= capacity_rows_) {
        slots_[lru_.back()].row.reset();
        lru_.pop_back();
    }
    lru_.push_front(i);
    slot.row = computed;
    slot.position = lru_.begin();
    return computed;
}

std::size_t KernelRowCache::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t KernelRowCache::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

Eigen::VectorXd KernelRowCache::compute_row(std::size_t i) const {
    const Eigen::Index n = points_.rows();
    const Eigen::Index dim = points_.cols();
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::VectorXd out(n);
    if (const auto* rbf = std::get_if<RbfKernel>(&kernel_); rbf && dim == 2) {
        const double x0 = points_(r, 0);
        const double x1 = points_(r, 1);
        const double* c0 = points_.col(0).data();
        const double* c1 = points_.col(1).data();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double d0 = c0[k] - x0;
            const double d1 = c1[k] - x1;
            out(k) = detail::exp_neg(rbf->gamma * (d0 * d0 + d1 * d1));
        }
        return out;
    }
    for (Eigen::Index k = 0; k < n; ++k) out(k) = kernel_eval(kernel_, points_.row(r), points_.row(k));
    return out;
}

}  // namespace velsurf
