#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "raid/detector.hpp"

namespace raid {

struct LabeledStream {
    std::vector<Observation> observations;
    std::vector<std::uint8_t> labels;
    std::string name;

    /// Throws std::invalid_argument on length mismatch or non-binary labels.
    void validate() const;
};

/// Pointwise confusion counts and derived scores. 0/0 ratios are reported as
/// 0 and flagged in `degenerate`.
struct MetricsReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double avg_latency_ms = 0.0;
    std::size_t samples = 0;
    bool degenerate = false;
};

[[nodiscard]] MetricsReport compute_metrics(std::span<const std::uint8_t> labels,
                                            std::span<const std::uint8_t> predictions);

/// Sums the confusion counts of several runs; latency is sample-weighted.
[[nodiscard]] MetricsReport combine_reports(std::span<const MetricsReport> reports);

struct ScoreOptions {
    /// Leave records flagged in_grace out of the confusion counts.
    bool exclude_grace = false;
};

/// Streams the observations through a fresh detector once and compares y_g with
/// the labels. Latency covers each detector call (construction for the first
/// sample, step for the rest). When `records` is non-null the emitted records
/// are appended to it.
[[nodiscard]] MetricsReport score_run(const DetectorConfig& config, const LabeledStream& stream,
                                      const ScoreOptions& options = {},
                                      std::vector<DetectionRecord>* records = nullptr);

/// Runs score_run per stream and combines the reports.
[[nodiscard]] MetricsReport score_runs(const DetectorConfig& config, std::span<const LabeledStream> streams,
                                       const ScoreOptions& options = {});

struct SweepRow {
    double threshold = 0.0;
    MetricsReport report;
};

struct SweepResult {
    double best_threshold = 0.0;
    MetricsReport best;
    std::vector<SweepRow> rows;
};

/// One streaming pass per grid point (evaluated concurrently). The best row
/// maximizes F1; ties go to the larger threshold. Throws std::invalid_argument
/// for an empty grid.
[[nodiscard]] SweepResult sweep_threshold(const DetectorConfig& config, std::span<const LabeledStream> streams,
                                          std::span<const double> grid, const ScoreOptions& options = {});

enum class ScenarioKind { spikes, mean_shift, packet_loss, drift };

[[nodiscard]] ScenarioKind parse_scenario_kind(std::string_view name);
[[nodiscard]] std::string_view scenario_name(ScenarioKind kind);

struct SynthParams {
    std::size_t dim = 2;
    std::size_t samples = 5000;
    Seconds interval = 60.0;
    Seconds start = 1600000000.0;
    /// Common pairwise correlation of the noise.
    double correlation = 0.0;
    double noise_sigma = 1.0;

    std::size_t spikes = 25;
    double spike_sigma = 8.0;
    /// +1 or -1 fixes the direction of every spike; 0 draws it per spike.
    int spike_sign = 0;
    /// No spikes are placed before this index.
    std::size_t quiet_prefix = 1000;

    std::size_t shift_index = 2500;
    double shift_sigma = 10.0;
    /// Samples labelled anomalous after the shift, before the model is
    /// expected to have adapted.
    std::size_t transient_samples = 100;

    std::size_t gap_index = 2500;
    /// Length of the gap in sampling intervals.
    std::size_t gap_steps = 1440;

    /// Mean drift per sample, in noise standard deviations.
    double drift_per_sample = 1e-3;

    /// Throws std::invalid_argument for inconsistent parameters.
    void validate(ScenarioKind kind) const;
};

/// Deterministic synthetic stream reproducing one field phenomenon. Labels
/// mark the injected events: spikes, the post-shift transient, or the first
/// observation after the gap. Drift carries no positive labels.
[[nodiscard]] LabeledStream synth_scenario(ScenarioKind kind, const SynthParams& params, std::uint64_t seed);

/// CSV with header "timestamp,x0,..,x{k-1},label", ISO-8601 UTC timestamps.
void write_labeled_csv(std::ostream& out, const LabeledStream& stream);

/// Loads every *.csv below `root` (recursively, sorted by path) in the SKAB
/// layout: ';' delimiter, `datetime` column, `anomaly` label and a
/// `changepoint` column that is ignored. Throws IoError when none are found.
[[nodiscard]] std::vector<LabeledStream> load_skab(const std::string& root);

[[nodiscard]] nlohmann::json report_to_json(const MetricsReport& report);
/// Table with F1, Recall, Precision (percent) and average latency rows.
void print_report_table(std::ostream& out, const MetricsReport& report, std::string_view title);

}  // namespace raid
