#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace raid {

/// Raised when a covariance matrix cannot be factorized even after the
/// diagonal boost.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lowest value reported for a log-probability. A probability that
/// underflows to zero is reported as this instead of -inf.
inline constexpr double kLogProbFloor = -745.0;

struct GaussianParams {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    /// Diagonal boost used when the plain factorization fails. Zero selects
    /// default_regularization(cov).
    double regularization = 0.0;

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// 1e-9 * trace(cov)/k, floored at 1e-12 so that an all-zero covariance
/// (constant signals) still factorizes.
[[nodiscard]] double default_regularization(const Eigen::MatrixXd& cov);

/// Lower Cholesky factor L with L L^T = cov, or cov + eps*I when a pivot of the
/// plain factorization is not positive. Throws NumericError when the boosted
/// matrix still fails, std::invalid_argument for a non-square or asymmetric input.
[[nodiscard]] Eigen::MatrixXd factorize(const Eigen::MatrixXd& cov, double eps);

[[nodiscard]] double log_pdf(const Eigen::VectorXd& x, const GaussianParams& params);
[[nodiscard]] double pdf(const Eigen::VectorXd& x, const GaussianParams& params);

struct QmcOptions {
    std::size_t max_points = 16384;
    std::size_t batches = 8;
    double target_error = 1e-6;
    std::uint64_t seed = 0;
    /// Also estimate log(1 - F) with full relative accuracy near F = 1.
    bool with_complement = false;
};

struct CdfEstimate {
    double log_prob = 0.0;
    /// Standard error across randomization batches, on the probability scale.
    double abs_error = 0.0;
    std::size_t points_used = 0;
    /// log(1 - F); only filled when QmcOptions::with_complement is set.
    double log_complement = 0.0;
};

/// log F(x; mean, cov) for the multivariate normal CDF. Uses the
/// separation-of-variables transform with variable reordering and
/// randomized lattice quasi-Monte Carlo, refining until the standard error
/// drops below target_error or max_points is reached. Exact for k = 1 and for
/// diagonal covariance. Deterministic for a fixed seed.
[[nodiscard]] CdfEstimate mvn_log_cdf(const Eigen::VectorXd& x, const GaussianParams& params,
                                      const QmcOptions& options = {});

}  // namespace raid
