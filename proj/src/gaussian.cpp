#include "raid/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "raid/normal.hpp"

namespace raid {
namespace {

constexpr double kLog2Pi = 1.83787706640934548356;
// A pivot below this fraction of its original diagonal entry is treated as a
// failed factorization.
constexpr double kPivotTol = 1e-12;

void check_square_symmetric(const Eigen::MatrixXd& cov) {
    if (cov.rows() == 0 || cov.rows() != cov.cols()) {
        throw std::invalid_argument("covariance must be a non-empty square matrix");
    }
    const double scale = std::max(cov.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::invalid_argument("covariance must be symmetric");
    }
    if (!cov.allFinite()) {
        throw NumericError("covariance contains non-finite entries");
    }
}

void check_point(const Eigen::VectorXd& x, const GaussianParams& p) {
    if (p.mean.size() == 0) {
        throw std::invalid_argument("Gaussian dimension must be positive");
    }
    if (x.size() != p.mean.size() || p.cov.rows() != p.mean.size()) {
        throw std::invalid_argument("dimension mismatch between point, mean and covariance");
    }
}

double resolve_eps(const GaussianParams& p) {
    return p.regularization > 0.0 ? p.regularization : default_regularization(p.cov);
}

bool try_cholesky(const Eigen::MatrixXd& a, Eigen::MatrixXd& l) {
    const Eigen::Index k = a.rows();
    l.setZero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(pivot > kPivotTol * std::abs(a(j, j))) || !(pivot > 0.0)) {
            return false;
        }
        l(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < k; ++i) {
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    return true;
}

bool is_diagonal(const Eigen::MatrixXd& cov) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
        for (Eigen::Index i = 0; i < cov.rows(); ++i) {
            if (i != j && cov(i, j) != 0.0) {
                return false;
            }
        }
    }
    return true;
}

// log(1 - exp(lp)) for lp <= 0.
double log_one_minus_exp(double lp) {
    const double c = -std::expm1(lp);
    return c > 0.0 ? std::max(std::log(c), kLogProbFloor) : kLogProbFloor;
}

double clamp_log_prob(double lp) {
    if (std::isnan(lp)) {
        return lp;
    }
    return std::clamp(lp, kLogProbFloor, 0.0);
}

// Cholesky factorization with greedy variable reordering: at each stage the
// remaining variable with the smallest expected conditional probability is
// placed next. The upper limits are permuted along with the rows.
struct ReorderedFactor {
    Eigen::MatrixXd chol;
    Eigen::VectorXd upper;
};

bool reordered_cholesky(Eigen::MatrixXd cov, Eigen::VectorXd upper, ReorderedFactor& out) {
    const Eigen::Index k = cov.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(k);

    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::Index best = i;
        double best_prob = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = i; j < k; ++j) {
            const double var = cov(j, j) - l.row(j).head(i).squaredNorm();
            const double shift = l.row(j).head(i).dot(expected.head(i));
            const double centered = upper[j] - shift;
            double prob;
            if (var > 0.0) {
                prob = normal_cdf(centered / std::sqrt(var));
            } else {
                prob = centered >= 0.0 ? 1.0 : 0.0;
            }
            if (prob < best_prob) {
                best_prob = prob;
                best = j;
            }
        }
        if (best != i) {
            cov.row(i).swap(cov.row(best));
            cov.col(i).swap(cov.col(best));
            std::swap(upper[i], upper[best]);
            l.row(i).head(i).swap(l.row(best).head(i));
        }
        const double pivot = cov(i, i) - l.row(i).head(i).squaredNorm();
        if (!(pivot > kPivotTol * std::abs(cov(i, i))) || !(pivot > 0.0)) {
            return false;
        }
        l(i, i) = std::sqrt(pivot);
        for (Eigen::Index j = i + 1; j < k; ++j) {
            l(j, i) = (cov(j, i) - l.row(j).head(i).dot(l.row(i).head(i))) / l(i, i);
        }
        // E[Z | Z < z] for a standard normal, -phi(z)/Phi(z).
        const double z = (upper[i] - l.row(i).head(i).dot(expected.head(i))) / l(i, i);
        expected[i] = -std::exp(normal_log_pdf(z) - normal_log_cdf(z));
    }
    out.chol = std::move(l);
    out.upper = std::move(upper);
    return true;
}

double fractional_part(double v) {
    return v - std::floor(v);
}

std::vector<double> lattice_generators(std::size_t count) {
    std::vector<double> alphas;
    alphas.reserve(count);
    for (unsigned candidate = 2; alphas.size() < count; ++candidate) {
        bool prime = true;
        for (unsigned d = 2; d * d <= candidate; ++d) {
            if (candidate % d == 0) {
                prime = false;
                break;
            }
        }
        if (prime) {
            alphas.push_back(fractional_part(std::sqrt(static_cast<double>(candidate))));
        }
    }
    return alphas;
}

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

CdfEstimate diagonal_log_cdf(const Eigen::VectorXd& upper, const Eigen::MatrixXd& cov, double eps,
                             bool with_complement) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < upper.size(); ++j) {
        double var = cov(j, j);
        if (!(var > 0.0)) {
            var += eps;
        }
        if (!(var > 0.0)) {
            throw NumericError("non-positive variance on the diagonal");
        }
        lp += normal_log_cdf(upper[j] / std::sqrt(var));
    }
    CdfEstimate est;
    est.log_prob = clamp_log_prob(lp);
    if (with_complement) {
        est.log_complement = log_one_minus_exp(lp);
    }
    return est;
}

}  // namespace

double default_regularization(const Eigen::MatrixXd& cov) {
    if (cov.rows() == 0) {
        return 1e-12;
    }
    const double eps = 1e-9 * cov.trace() / static_cast<double>(cov.rows());
    return std::max(eps, 1e-12);
}

Eigen::MatrixXd factorize(const Eigen::MatrixXd& cov, double eps) {
    check_square_symmetric(cov);
    Eigen::MatrixXd l;
    if (try_cholesky(cov, l)) {
        return l;
    }
    if (eps > 0.0) {
        Eigen::MatrixXd boosted = cov;
        boosted.diagonal().array() += eps;
        if (try_cholesky(boosted, l)) {
            return l;
        }
    }
    throw NumericError("covariance is not positive definite after regularization");
}

double log_pdf(const Eigen::VectorXd& x, const GaussianParams& params) {
    check_point(x, params);
    const Eigen::MatrixXd l = factorize(params.cov, resolve_eps(params));
    const Eigen::VectorXd v = l.triangularView<Eigen::Lower>().solve(x - params.mean);
    const double k = static_cast<double>(x.size());
    return -0.5 * v.squaredNorm() - l.diagonal().array().log().sum() - 0.5 * k * kLog2Pi;
}

double pdf(const Eigen::VectorXd& x, const GaussianParams& params) {
    return std::exp(log_pdf(x, params));
}

CdfEstimate mvn_log_cdf(const Eigen::VectorXd& x, const GaussianParams& params, const QmcOptions& options) {
    check_point(x, params);
    check_square_symmetric(params.cov);
    if (options.batches < 2 || options.max_points < options.batches) {
        throw std::invalid_argument("QMC options need at least two batches and one point per batch");
    }
    const double eps = resolve_eps(params);
    const Eigen::VectorXd upper = x - params.mean;
    const Eigen::Index k = upper.size();

    if (k == 1 || is_diagonal(params.cov)) {
        return diagonal_log_cdf(upper, params.cov, eps, options.with_complement);
    }

    ReorderedFactor factor;
    if (!reordered_cholesky(params.cov, upper, factor)) {
        Eigen::MatrixXd boosted = params.cov;
        boosted.diagonal().array() += eps;
        if (!reordered_cholesky(boosted, upper, factor)) {
            throw NumericError("covariance is not positive definite after regularization");
        }
    }
    const Eigen::MatrixXd& l = factor.chol;
    const Eigen::VectorXd& b = factor.upper;

    // Strictly lower part of L packed row by row, and 1 / L_ii.
    std::vector<double> packed;
    packed.reserve(static_cast<std::size_t>(k * (k - 1) / 2));
    std::vector<double> inv_diag(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index m = 0; m < i; ++m) {
            packed.push_back(l(i, m));
        }
        inv_diag[static_cast<std::size_t>(i)] = 1.0 / l(i, i);
    }

    // The first factor does not depend on the integration point.
    const double z0 = b[0] * inv_diag[0];
    const double log_e0 = normal_log_cdf(z0);
    const double e0 = std::exp(log_e0);
    const double ec0 = normal_cdf(-z0);

    const auto dims = static_cast<std::size_t>(k - 1);
    const std::vector<double> alphas = lattice_generators(dims);
    const std::size_t nb = options.batches;
    std::mt19937_64 rng(options.seed);
    std::vector<double> shifts(nb * dims);
    for (double& s : shifts) {
        s = unit_uniform(rng);
    }

    constexpr double kTiny = std::numeric_limits<double>::min();
    constexpr double kBelowOne = 1.0 - 0x1.0p-53;
    std::vector<double> y(dims);

    // Integrand divided by e0. With the complement requested, also 1 - integrand,
    // accumulated as 1 - e_1..e_j = (1 - e_1..e_{j-1}) + e_1..e_{j-1} (1 - e_j)
    // so that no cancellation occurs when every factor is close to one.
    const auto evaluate = [&](std::size_t batch, std::size_t index, double& complement) {
        const double* shift = &shifts[batch * dims];
        const double* row = packed.data();
        double g = 1.0;
        double c = 0.0;
        double e_prev = e0;
        for (Eigen::Index i = 1; i < k; ++i) {
            const auto prev = static_cast<std::size_t>(i - 1);
            const double w = 1.0 - std::abs(2.0 * fractional_part(static_cast<double>(index) * alphas[prev] + shift[prev]) - 1.0);
            y[prev] = normal_quantile(std::clamp(w * e_prev, kTiny, kBelowOne));
            double s = 0.0;
            for (Eigen::Index m = 0; m < i; ++m) {
                s += row[m] * y[static_cast<std::size_t>(m)];
            }
            row += i;
            const double z = (b[i] - s) * inv_diag[static_cast<std::size_t>(i)];
            // The smaller tail is computed directly, the other as its complement.
            double e;
            double ec;
            if (z < 0.0) {
                e = normal_cdf(z);
                ec = 1.0 - e;
            } else {
                ec = normal_cdf(-z);
                e = 1.0 - ec;
            }
            c += g * ec;
            g *= e;
            if (g == 0.0) {
                break;
            }
            e_prev = e;
        }
        if (options.with_complement) {
            complement = ec0 + e0 * c;
        }
        return g;
    };

    std::vector<double> sums(nb, 0.0);
    std::vector<double> comp_sums(nb, 0.0);
    const std::size_t per_batch_max = options.max_points / nb;
    std::size_t done = 0;
    std::size_t target = std::max<std::size_t>(1, per_batch_max / 8);
    double mean_g = 0.0;
    double se_g = 0.0;
    while (true) {
        for (std::size_t batch = 0; batch < nb; ++batch) {
            for (std::size_t j = done; j < target; ++j) {
                double complement = 0.0;
                sums[batch] += evaluate(batch, j + 1, complement);
                comp_sums[batch] += complement;
            }
        }
        done = target;
        mean_g = 0.0;
        for (double s : sums) {
            mean_g += s / static_cast<double>(done);
        }
        mean_g /= static_cast<double>(nb);
        double ss = 0.0;
        for (double s : sums) {
            const double d = s / static_cast<double>(done) - mean_g;
            ss += d * d;
        }
        se_g = std::sqrt(ss / static_cast<double>(nb * (nb - 1)));
        if (se_g * e0 <= options.target_error || done >= per_batch_max) {
            break;
        }
        target = std::min(per_batch_max, 2 * done);
    }

    CdfEstimate est;
    est.points_used = done * nb;
    est.abs_error = se_g * e0;
    est.log_prob = mean_g > 0.0 ? clamp_log_prob(log_e0 + std::log(mean_g)) : kLogProbFloor;
    if (options.with_complement) {
        double total = 0.0;
        for (double s : comp_sums) {
            total += s;
        }
        const double mean_c = total / static_cast<double>(done * nb);
        est.log_complement = mean_c > 0.0 ? std::max(std::log(mean_c), kLogProbFloor) : kLogProbFloor;
    }
    return est;
}

}  // namespace raid
