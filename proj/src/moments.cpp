#include "raid/moments.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace raid {

UnivariateMoments::UnivariateMoments(double count, double mean, double comoment)
    : count_(count), mean_(mean), comoment_(comoment) {
    if (!(count >= 0.0)) {
        throw std::invalid_argument("UnivariateMoments: negative count");
    }
}

void UnivariateMoments::update(double x) {
    count_ += 1.0;
    const double delta = x - mean_;
    mean_ += delta / count_;
    comoment_ += delta * (x - mean_);
}

void UnivariateMoments::weighted_update(double x, double w) {
    if (!(w >= 0.0 && w <= 1.0)) {
        throw std::invalid_argument("weighted_update: weight must lie in [0, 1], got " +
                                    std::to_string(w));
    }
    if (w == 0.0) {
        return;
    }
    count_ += w;
    const double delta = x - mean_;
    mean_ += w * delta / count_;
    comoment_ += w * delta * (x - mean_);
}

void UnivariateMoments::revert(double x) {
    if (count_ < 1.0) {
        throw std::logic_error("UnivariateMoments::revert on empty state");
    }
    const double remaining = count_ - 1.0;
    if (remaining <= 0.0) {
        *this = UnivariateMoments{};
        return;
    }
    const double mean_prev = mean_ - (x - mean_) / remaining;
    comoment_ -= (x - mean_prev) * (x - mean_);
    comoment_ = std::max(comoment_, 0.0);
    mean_ = mean_prev;
    count_ = remaining;
}

double UnivariateMoments::variance() const {
    if (count_ < 2.0) {
        throw std::domain_error("variance requires at least two samples");
    }
    return comoment_ / (count_ - 1.0);
}

MultivariateMoments::MultivariateMoments(std::size_t dim)
    : mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      comoment_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {
    if (dim == 0) {
        throw std::invalid_argument("MultivariateMoments: dimension must be positive");
    }
}

MultivariateMoments::MultivariateMoments(std::size_t count, Eigen::VectorXd mean, Eigen::MatrixXd comoment)
    : count_(count), mean_(std::move(mean)), comoment_(std::move(comoment)) {
    if (mean_.size() == 0 || comoment_.rows() != mean_.size() || comoment_.cols() != mean_.size()) {
        throw std::invalid_argument("MultivariateMoments: inconsistent shapes");
    }
}

void MultivariateMoments::check_dim(Eigen::Index n) const {
    if (n != mean_.size()) {
        throw std::invalid_argument("dimension mismatch: expected " + std::to_string(mean_.size()) +
                                    ", got " + std::to_string(n));
    }
}

void MultivariateMoments::symmetric_rank_one(const Eigen::VectorXd& d, double s) {
    const Eigen::Index k = d.size();
    for (Eigen::Index j = 0; j < k; ++j) {
        const double sd = s * d[j];
        for (Eigen::Index i = j; i < k; ++i) {
            comoment_(i, j) += sd * d[i];
            comoment_(j, i) = comoment_(i, j);
        }
    }
}

// With d = x - mean_old, x - mean_new = d (n-1)/n, so the update
// C += d (x - mean_new)^T is the symmetric rank one term (n-1)/n d d^T.
void MultivariateMoments::update(const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_dim(x.size());
    ++count_;
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / n;
    symmetric_rank_one(delta, (n - 1.0) / n);
}

// Inverse of update(): with e = x - mean_n, mean_{n-1} = mean_n - e/(n-1) and
// C_{n-1} = C_n - n/(n-1) e e^T.
void MultivariateMoments::revert(const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_dim(x.size());
    if (count_ == 0) {
        throw std::logic_error("MultivariateMoments::revert on empty state");
    }
    if (count_ == 1) {
        count_ = 0;
        mean_.setZero();
        comoment_.setZero();
        return;
    }
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd delta = x - mean_;
    mean_ -= delta / (n - 1.0);
    symmetric_rank_one(delta, -n / (n - 1.0));
    --count_;
}

Eigen::MatrixXd MultivariateMoments::covariance() const {
    if (count_ < 2) {
        throw std::domain_error("covariance requires at least two samples");
    }
    return comoment_ / static_cast<double>(count_ - 1);
}

}  // namespace raid
