#pragma once

// Running first and second moments with forward (Welford) and reverse
// (inverse Welford) updates. The reverse update lets a caller maintain the
// statistics of a sliding window by reverting samples as they expire.

#include <cstddef>

#include <Eigen/Dense>

namespace raid {

/// Scalar running moments. `count` is real-valued so that fractional
/// (weighted) updates can share the same state.
class UnivariateMoments {
public:
    UnivariateMoments() = default;
    UnivariateMoments(double count, double mean, double comoment);

    void update(double x);

    /// Fractional-count update. w = 1 matches update() exactly, w = 0 is a no-op.
    /// Throws std::invalid_argument for w outside [0, 1].
    void weighted_update(double x, double w);

    /// Removes the contribution of a previously added x. Reverting the last
    /// remaining sample resets the state to empty. Throws std::logic_error when
    /// count < 1.
    void revert(double x);

    /// Unbiased variance S/(n-1). Throws std::domain_error when count < 2.
    [[nodiscard]] double variance() const;

    [[nodiscard]] double count() const noexcept { return count_; }
    [[nodiscard]] double mean() const noexcept { return mean_; }
    [[nodiscard]] double comoment() const noexcept { return comoment_; }

private:
    double count_ = 0.0;
    double mean_ = 0.0;
    double comoment_ = 0.0;
};

/// Vector running moments: count, mean vector and co-moment matrix C with
/// covariance C/(n-1). C is kept exactly symmetric.
class MultivariateMoments {
public:
    explicit MultivariateMoments(std::size_t dim);
    MultivariateMoments(std::size_t count, Eigen::VectorXd mean, Eigen::MatrixXd comoment);

    void update(const Eigen::Ref<const Eigen::VectorXd>& x);
    void revert(const Eigen::Ref<const Eigen::VectorXd>& x);

    /// Throws std::domain_error when count < 2.
    [[nodiscard]] Eigen::MatrixXd covariance() const;

    [[nodiscard]] std::size_t count() const noexcept { return count_; }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
    [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& comoment() const noexcept { return comoment_; }

private:
    void check_dim(Eigen::Index n) const;
    // C += s * d d^T, filling the lower triangle and mirroring.
    void symmetric_rank_one(const Eigen::VectorXd& d, double s);

    std::size_t count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd comoment_;
};

}  // namespace raid
