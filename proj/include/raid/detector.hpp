#pragma once

// Online detection and identification: global log-CDF scoring, per-signal
// dynamic limits, self-supervised adaptation over a time-expiring window,
// changepoint flags and sampling-interval anomalies.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "raid/gaussian.hpp"
#include "raid/moments.hpp"

namespace raid {

/// Durations and timestamps are seconds; timestamps are seconds since the Unix epoch.
using Seconds = double;

struct Observation {
    Seconds timestamp = 0.0;
    Eigen::VectorXd values;
};

enum class ScoreMode {
    /// Joint CDF with the full covariance.
    joint,
    /// Product of marginal CDFs (covariance diagonal only).
    independent,
};

struct DetectorConfig {
    Seconds expiration_period = 0.0;
    double threshold = -25.0;
    /// Defaults to expiration_period / 4.
    std::optional<Seconds> adaptation_period;
    /// Defaults to 3 * expiration_period / 4.
    std::optional<Seconds> grace_period;
    double q = 0.9973;
    QmcOptions qmc{};
    /// Zero selects default_regularization() of the current covariance.
    double regularization = 0.0;
    /// Score with log(2 min(F, 1 - F)) so that excursions above the mean are
    /// also flagged.
    bool two_sided_score = false;
    ScoreMode score_mode = ScoreMode::joint;

    [[nodiscard]] Seconds adaptation() const;
    [[nodiscard]] Seconds grace() const;
    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

struct DetectionRecord {
    Seconds timestamp = 0.0;
    double score = 0.0;
    bool y_g = false;
    std::vector<std::uint8_t> y_s;
    bool y_t = false;
    bool y_c = false;
    std::vector<double> x_l;
    std::vector<double> x_u;
    bool in_grace = false;
    /// Population of the model after this step.
    std::size_t n = 0;

    bool operator==(const DetectionRecord&) const = default;
};

struct BufferedSample {
    Seconds timestamp = 0.0;
    Eigen::VectorXd values;
};

/// Observations whose effect is currently present in the moments, oldest first.
using SampleBuffer = std::deque<BufferedSample>;

/// Trailing (timestamp, y_g) history used by the adaptation test.
class AnomalyWindow {
public:
    struct Entry {
        Seconds timestamp;
        bool anomaly;
    };

    void push(Seconds timestamp, bool anomaly);
    /// Drops entries strictly older than cutoff.
    void evict_before(Seconds cutoff);

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] std::size_t anomalies() const noexcept { return anomalies_; }
    [[nodiscard]] const std::deque<Entry>& entries() const noexcept { return entries_; }

private:
    std::deque<Entry> entries_;
    std::size_t anomalies_ = 0;
};

/// True when the anomaly fraction of the window exceeds 2(q - 0.5). An empty
/// window never passes.
[[nodiscard]] bool adaptation_test(const AnomalyWindow& window, double q);

/// Inter-arrival time model. Learns every interval (weighted down when
/// anomalous) and never forgets.
class SamplingMonitor {
public:
    SamplingMonitor() = default;
    explicit SamplingMonitor(UnivariateMoments moments) : moments_(moments) {}

    /// Returns y_t for the interval dt and folds it into the model.
    /// Throws std::invalid_argument for dt <= 0.
    bool step(Seconds dt, double q);

    [[nodiscard]] const UnivariateMoments& moments() const noexcept { return moments_; }

private:
    UnivariateMoments moments_;
};

class Detector {
public:
    /// Everything needed to resume a detector exactly where it stopped.
    struct State {
        DetectorConfig config;
        Seconds start_time = 0.0;
        Seconds last_time = 0.0;
        MultivariateMoments moments{1};
        SampleBuffer buffer;
        AnomalyWindow window;
        SamplingMonitor sampling;
    };

    /// Seeds the model with the first observation. The record for that
    /// observation is available through initial_record().
    Detector(DetectorConfig config, const Observation& first);
    /// Restores a detector from a previously captured state.
    explicit Detector(State state);

    /// Processes one observation. Throws std::invalid_argument for a
    /// non-increasing timestamp or a dimension mismatch, NumericError when the
    /// covariance cannot be factorized.
    DetectionRecord step(const Observation& obs);

    /// Lower and upper per-signal limits from the current marginals.
    /// Throws std::logic_error while fewer than two samples are held.
    [[nodiscard]] std::pair<Eigen::VectorXd, Eigen::VectorXd> limits() const;

    /// (mean, covariance) used for scoring; identity covariance while n < 2.
    [[nodiscard]] GaussianParams params() const;

    [[nodiscard]] double score(const Eigen::VectorXd& values) const;

    [[nodiscard]] std::size_t dim() const noexcept { return state_.moments.dim(); }
    [[nodiscard]] std::size_t population() const noexcept { return state_.moments.count(); }
    [[nodiscard]] bool in_grace(Seconds timestamp) const noexcept;
    [[nodiscard]] const DetectorConfig& config() const noexcept { return state_.config; }
    [[nodiscard]] const State& state() const noexcept { return state_; }
    [[nodiscard]] const std::optional<DetectionRecord>& initial_record() const noexcept { return initial_; }

private:
    std::pair<Eigen::VectorXd, Eigen::VectorXd> limits_for(const GaussianParams& params) const;
    DetectionRecord diagnose(const Observation& obs, bool in_grace) const;
    void incorporate(const Observation& obs);
    void expire(Seconds now);

    State state_;
    std::optional<DetectionRecord> initial_;
};

}  // namespace raid
