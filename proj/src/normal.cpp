#include "raid/normal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace raid {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

template <std::size_t N>
double horner(const std::array<double, N>& c, double x) {
    double acc = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) {
        acc = acc * x + c[i];
    }
    return acc;
}

}  // namespace

double normal_cdf(double z) noexcept {
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

double normal_log_cdf(double z) noexcept {
    if (std::isnan(z)) {
        return z;
    }
    if (z > 0.0) {
        return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
    }
    if (z > -37.0) {
        return std::log(0.5 * std::erfc(-z * kInvSqrt2));
    }
    if (std::isinf(z)) {
        return -std::numeric_limits<double>::infinity();
    }
    // Asymptotic series of Mills' ratio; the truncation error is below 1e-13
    // for z < -37.
    const double r = 1.0 / (z * z);
    const double series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - r * 105.0)));
    return -0.5 * z * z - std::log(-z) - kHalfLog2Pi + std::log(series);
}

double normal_log_pdf(double z) noexcept {
    return -0.5 * z * z - kHalfLog2Pi;
}

double normal_quantile(double p) noexcept {
    static constexpr std::array<double, 8> a{
        3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
        1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
        3.3430575583588128105e+4, 2.5090809287301226727e+3};
    static constexpr std::array<double, 8> b{
        1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
        2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
        5.2264952788528545610e+3};
    static constexpr std::array<double, 8> c{
        1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
        3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr std::array<double, 8> d{
        1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
        1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
        1.05075007164441684324e-9};
    static constexpr std::array<double, 8> e{
        6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
        2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr std::array<double, 8> f{
        1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
        7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
        2.04426310338993978564e-15};

    if (p <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (p >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(a, r) / horner(b, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = horner(c, r) / horner(d, r);
    } else {
        r -= 5.0;
        x = horner(e, r) / horner(f, r);
    }
    return q < 0.0 ? -x : x;
}

double uni_cdf(double x, double mean, double var) {
    if (!(var > 0.0)) {
        throw std::invalid_argument("uni_cdf: variance must be positive");
    }
    return normal_cdf((x - mean) / std::sqrt(var));
}

double brent_root(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(lo < hi)) {
        throw std::invalid_argument("brent_root: requires lo < hi");
    }
    constexpr int kMaxIter = 200;
    constexpr double kEps = std::numeric_limits<double>::epsilon();

    double a = lo;
    double b = hi;
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) {
        return a;
    }
    if (fb == 0.0) {
        return b;
    }
    if ((fa > 0.0) == (fb > 0.0)) {
        throw std::invalid_argument("brent_root: interval does not bracket a root");
    }
    double c = b;
    double fc = fb;
    double d = b - a;
    double e = d;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * kEps * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) {
            return b;
        }
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // Inverse quadratic interpolation, or secant when only two points are distinct.
            const double s = fb / fa;
            double p;
            double q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) {
                q = -q;
            }
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
    }
    return b;
}

double uni_ppf(double q, double mean, double var) {
    if (!(q > 0.0 && q < 1.0)) {
        throw std::invalid_argument("uni_ppf: quantile must lie in (0, 1)");
    }
    if (!(var > 0.0)) {
        throw std::invalid_argument("uni_ppf: variance must be positive");
    }
    constexpr double kGrowth = 10.0;
    constexpr int kMaxExpansions = 8;
    const auto residual = [q](double z) { return normal_cdf(z) - q; };

    double lo = -kGrowth;
    double hi = kGrowth;
    for (int i = 0; i < kMaxExpansions && residual(lo) > 0.0; ++i) {
        hi = lo;
        lo *= kGrowth;
    }
    for (int i = 0; i < kMaxExpansions && residual(hi) < 0.0; ++i) {
        lo = hi;
        hi *= kGrowth;
    }
    const double z = brent_root(residual, lo, hi, 1e-15);
    return z * std::sqrt(var) + mean;
}

}  // namespace raid
