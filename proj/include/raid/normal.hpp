#pragma once

#include <functional>

namespace raid {

/// Standard normal CDF, Phi(z).
[[nodiscard]] double normal_cdf(double z) noexcept;

/// log Phi(z), accurate deep into the lower tail where Phi underflows.
[[nodiscard]] double normal_log_cdf(double z) noexcept;

/// log phi(z).
[[nodiscard]] double normal_log_pdf(double z) noexcept;

/// Closed-form standard normal quantile (Wichura AS241, ~1e-16 relative).
/// Used as the inner-loop transform of the quasi-Monte Carlo integrator. The
/// detector's process limits go through uni_ppf instead.
[[nodiscard]] double normal_quantile(double p) noexcept;

/// CDF of N(mean, var) at x. Throws std::invalid_argument if var <= 0.
[[nodiscard]] double uni_cdf(double x, double mean, double var);

/// Percent-point function of N(mean, var): bracket expansion in standardized
/// space starting from [-10, 10] with growth factor 10, then Brent root finding
/// on Phi(z) - q. Returns z * sqrt(var) + mean.
/// Throws std::invalid_argument unless 0 < q < 1 and var > 0.
[[nodiscard]] double uni_ppf(double q, double mean, double var);

/// Brent's bracketing root finder. Requires f(lo) * f(hi) <= 0 and lo < hi
/// (std::invalid_argument otherwise). Stops when f(x) == 0 or the bracket is
/// narrower than tol, after at most 200 iterations.
[[nodiscard]] double brent_root(const std::function<double(double)>& f, double lo, double hi, double tol);

}  // namespace raid
