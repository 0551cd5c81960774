#include "raid/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "raid/normal.hpp"

namespace raid {
namespace {

constexpr double kVarianceFloor = 1e-12;
constexpr double kLog2 = 0.69314718055994530942;

void check_values(const Eigen::VectorXd& values, std::size_t dim) {
    if (static_cast<std::size_t>(values.size()) != dim) {
        throw std::invalid_argument("observation has " + std::to_string(values.size()) +
                                    " values, detector expects " + std::to_string(dim));
    }
    if (!values.allFinite()) {
        throw std::invalid_argument("observation contains non-finite values");
    }
}

}  // namespace

Seconds DetectorConfig::adaptation() const {
    return adaptation_period.value_or(expiration_period / 4.0);
}

Seconds DetectorConfig::grace() const {
    return grace_period.value_or(3.0 * expiration_period / 4.0);
}

void DetectorConfig::validate() const {
    if (!(expiration_period > 0.0) || !std::isfinite(expiration_period)) {
        throw std::invalid_argument("expiration period must be positive");
    }
    const Seconds ta = adaptation();
    if (!(ta > 0.0 && ta <= expiration_period)) {
        throw std::invalid_argument("adaptation period must lie in (0, expiration period]");
    }
    const Seconds g = grace();
    if (!(g >= 0.0) || !std::isfinite(g)) {
        throw std::invalid_argument("grace period must be non-negative and finite");
    }
    if (!(q > 0.5 && q < 1.0)) {
        throw std::invalid_argument("q must lie in (0.5, 1)");
    }
    if (std::isnan(threshold)) {
        throw std::invalid_argument("threshold must be a number");
    }
    if (qmc.batches < 2 || qmc.max_points < qmc.batches || !(qmc.target_error >= 0.0)) {
        throw std::invalid_argument("invalid quasi-Monte Carlo options");
    }
    if (!(regularization >= 0.0)) {
        throw std::invalid_argument("regularization must be non-negative");
    }
}

void AnomalyWindow::push(Seconds timestamp, bool anomaly) {
    entries_.push_back({timestamp, anomaly});
    anomalies_ += anomaly ? 1 : 0;
}

void AnomalyWindow::evict_before(Seconds cutoff) {
    while (!entries_.empty() && entries_.front().timestamp < cutoff) {
        anomalies_ -= entries_.front().anomaly ? 1 : 0;
        entries_.pop_front();
    }
}

bool adaptation_test(const AnomalyWindow& window, double q) {
    if (window.size() == 0) {
        return false;
    }
    const double fraction = static_cast<double>(window.anomalies()) / static_cast<double>(window.size());
    return fraction > 2.0 * (q - 0.5);
}

bool SamplingMonitor::step(Seconds dt, double q) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("sampling interval must be positive");
    }
    if (moments_.count() < 2.0) {
        moments_.update(dt);
        return false;
    }
    const double mean = moments_.mean();
    const double var = moments_.variance();
    bool anomaly;
    double weight;
    if (var < kVarianceFloor * std::max(1.0, mean * mean)) {
        // Identical intervals so far: any noticeably longer gap is anomalous
        // and is not learned.
        anomaly = dt > mean * (1.0 + 1e-6);
        weight = anomaly ? 0.0 : 1.0;
    } else {
        const double cdf = uni_cdf(dt, mean, var);
        anomaly = cdf > q;
        weight = anomaly ? 1.0 - cdf : 1.0;
    }
    moments_.weighted_update(dt, weight);
    return anomaly;
}

Detector::Detector(DetectorConfig config, const Observation& first) {
    config.validate();
    if (first.values.size() == 0) {
        throw std::invalid_argument("observation vector must not be empty");
    }
    state_.config = std::move(config);
    state_.moments = MultivariateMoments(static_cast<std::size_t>(first.values.size()));
    check_values(first.values, dim());
    state_.start_time = first.timestamp;
    state_.last_time = first.timestamp;

    incorporate(first);
    DetectionRecord rec = diagnose(first, in_grace(first.timestamp));
    state_.window.push(first.timestamp, rec.y_g);
    rec.n = population();
    initial_ = std::move(rec);
}

Detector::Detector(State state) : state_(std::move(state)) {
    state_.config.validate();
    if (state_.buffer.size() != state_.moments.count()) {
        throw std::invalid_argument("detector state: buffer size does not match the model population");
    }
    for (const auto& sample : state_.buffer) {
        check_values(sample.values, dim());
    }
}

bool Detector::in_grace(Seconds timestamp) const noexcept {
    return timestamp < state_.start_time + state_.config.grace();
}

GaussianParams Detector::params() const {
    GaussianParams p;
    p.mean = state_.moments.mean();
    const auto k = static_cast<Eigen::Index>(dim());
    p.cov = state_.moments.count() >= 2 ? state_.moments.covariance() : Eigen::MatrixXd::Identity(k, k);
    p.regularization = state_.config.regularization;
    return p;
}

double Detector::score(const Eigen::VectorXd& values) const {
    GaussianParams p = params();
    if (state_.config.score_mode == ScoreMode::independent) {
        p.cov = Eigen::MatrixXd(p.cov.diagonal().asDiagonal());
    }
    QmcOptions options = state_.config.qmc;
    options.with_complement = state_.config.two_sided_score;
    const CdfEstimate est = mvn_log_cdf(values, p, options);
    if (!state_.config.two_sided_score) {
        return est.log_prob;
    }
    return std::clamp(std::min(est.log_prob, est.log_complement) + kLog2, kLogProbFloor, 0.0);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Detector::limits_for(const GaussianParams& params) const {
    const double q = state_.config.q;
    const double upper_q = (1.0 + q) / 2.0;
    const auto k = params.mean.size();
    Eigen::VectorXd lower(k);
    Eigen::VectorXd upper(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double mu = params.mean[j];
        double var = params.cov(j, j);
        if (!(var >= kVarianceFloor * std::max(1.0, mu * mu))) {
            var = kVarianceFloor;
        }
        lower[j] = uni_ppf(1.0 - upper_q, mu, var);
        upper[j] = uni_ppf(upper_q, mu, var);
    }
    return {std::move(lower), std::move(upper)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Detector::limits() const {
    if (population() < 2) {
        throw std::logic_error("limits require at least two samples in the model");
    }
    return limits_for(params());
}

DetectionRecord Detector::diagnose(const Observation& obs, bool grace) const {
    DetectionRecord rec;
    rec.timestamp = obs.timestamp;
    rec.in_grace = grace;
    rec.score = score(obs.values);
    rec.y_g = !grace && rec.score < state_.config.threshold;

    const auto [lower, upper] = limits_for(params());
    const auto k = obs.values.size();
    rec.x_l.assign(lower.data(), lower.data() + k);
    rec.x_u.assign(upper.data(), upper.data() + k);
    rec.y_s.resize(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
        const double v = obs.values[j];
        rec.y_s[static_cast<std::size_t>(j)] = (v < lower[j] || v > upper[j]) ? 1 : 0;
    }
    return rec;
}

void Detector::incorporate(const Observation& obs) {
    state_.moments.update(obs.values);
    state_.buffer.push_back({obs.timestamp, obs.values});
}

// Reverts samples older than now - t_e, but never below two samples so the
// covariance stays defined.
void Detector::expire(Seconds now) {
    const Seconds cutoff = now - state_.config.expiration_period;
    while (!state_.buffer.empty() && state_.buffer.front().timestamp < cutoff && state_.moments.count() > 2) {
        state_.moments.revert(state_.buffer.front().values);
        state_.buffer.pop_front();
    }
}

DetectionRecord Detector::step(const Observation& obs) {
    check_values(obs.values, dim());
    if (!(obs.timestamp > state_.last_time)) {
        throw std::invalid_argument("timestamps must strictly increase");
    }
    const DetectorConfig& cfg = state_.config;

    const bool sampling_anomaly = state_.sampling.step(obs.timestamp - state_.last_time, cfg.q);
    const bool grace = in_grace(obs.timestamp);
    DetectionRecord rec = diagnose(obs, grace);
    rec.y_t = sampling_anomaly;

    state_.window.push(obs.timestamp, rec.y_g);
    state_.window.evict_before(obs.timestamp - cfg.adaptation());
    const bool adapt = !grace && adaptation_test(state_.window, cfg.q);
    rec.y_c = rec.y_g && adapt;

    if (grace || !rec.y_g || adapt) {
        incorporate(obs);
    }
    expire(obs.timestamp);
    state_.last_time = obs.timestamp;
    rec.n = population();
    return rec;
}

}  // namespace raid
