#include "raid/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "raid/stream_io.hpp"

namespace raid {
namespace {

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

void finish(MetricsReport& r) {
    r.degenerate = false;
    r.precision = ratio(r.tp, r.tp + r.fp, r.degenerate);
    r.recall = ratio(r.tp, r.tp + r.fn, r.degenerate);
    const double denom = r.precision + r.recall;
    r.f1 = denom > 0.0 ? 2.0 * r.precision * r.recall / denom : 0.0;
    r.samples = r.tp + r.fp + r.fn + r.tn;
}

void tally(MetricsReport& r, bool label, bool prediction) {
    if (label) {
        (prediction ? r.tp : r.fn) += 1;
    } else {
        (prediction ? r.fp : r.tn) += 1;
    }
}

}  // namespace

void LabeledStream::validate() const {
    if (observations.size() != labels.size()) {
        throw std::invalid_argument("labeled stream: " + std::to_string(observations.size()) + " observations but " +
                                    std::to_string(labels.size()) + " labels");
    }
    for (auto l : labels) {
        if (l > 1) {
            throw std::invalid_argument("labeled stream: labels must be 0 or 1");
        }
    }
}

MetricsReport compute_metrics(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions) {
    if (labels.size() != predictions.size()) {
        throw std::invalid_argument("labels and predictions differ in length");
    }
    MetricsReport r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        tally(r, labels[i] != 0, predictions[i] != 0);
    }
    finish(r);
    return r;
}

MetricsReport combine_reports(std::span<const MetricsReport> reports) {
    MetricsReport total;
    double latency_sum = 0.0;
    std::size_t latency_samples = 0;
    for (const auto& r : reports) {
        total.tp += r.tp;
        total.fp += r.fp;
        total.fn += r.fn;
        total.tn += r.tn;
        const std::size_t n = r.tp + r.fp + r.fn + r.tn;
        latency_sum += r.avg_latency_ms * static_cast<double>(n);
        latency_samples += n;
    }
    finish(total);
    total.avg_latency_ms = latency_samples > 0 ? latency_sum / static_cast<double>(latency_samples) : 0.0;
    return total;
}

MetricsReport score_run(const DetectorConfig& config, const LabeledStream& stream, const ScoreOptions& options,
                        std::vector<DetectionRecord>* records) {
    stream.validate();
    if (stream.observations.empty()) {
        throw std::invalid_argument("score_run: empty stream");
    }
    using clock = std::chrono::steady_clock;
    MetricsReport report;
    clock::duration elapsed{};
    const auto consume = [&](const DetectionRecord& rec, std::size_t i) {
        if (!(options.exclude_grace && rec.in_grace)) {
            tally(report, stream.labels[i] != 0, rec.y_g);
        }
        if (records != nullptr) {
            records->push_back(rec);
        }
    };

    auto t0 = clock::now();
    Detector detector(config, stream.observations.front());
    elapsed += clock::now() - t0;
    consume(*detector.initial_record(), 0);
    for (std::size_t i = 1; i < stream.observations.size(); ++i) {
        t0 = clock::now();
        DetectionRecord rec = detector.step(stream.observations[i]);
        elapsed += clock::now() - t0;
        consume(rec, i);
    }
    finish(report);
    report.avg_latency_ms = std::chrono::duration<double, std::milli>(elapsed).count() /
                            static_cast<double>(stream.observations.size());
    return report;
}

MetricsReport score_runs(const DetectorConfig& config, std::span<const LabeledStream> streams,
                         const ScoreOptions& options) {
    std::vector<MetricsReport> reports;
    reports.reserve(streams.size());
    for (const auto& s : streams) {
        reports.push_back(score_run(config, s, options));
    }
    return combine_reports(reports);
}

SweepResult sweep_threshold(const DetectorConfig& config, std::span<const LabeledStream> streams,
                            std::span<const double> grid, const ScoreOptions& options) {
    if (grid.empty()) {
        throw std::invalid_argument("sweep_threshold: empty threshold grid");
    }
    std::vector<std::future<MetricsReport>> pending;
    pending.reserve(grid.size());
    for (double threshold : grid) {
        DetectorConfig c = config;
        c.threshold = threshold;
        pending.push_back(std::async(std::launch::async, [c, streams, options] { return score_runs(c, streams, options); }));
    }
    SweepResult result;
    bool have_best = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepRow row{grid[i], pending[i].get()};
        if (!have_best || row.report.f1 > result.best.f1 ||
            (row.report.f1 == result.best.f1 && row.threshold > result.best_threshold)) {
            result.best = row.report;
            result.best_threshold = row.threshold;
            have_best = true;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

ScenarioKind parse_scenario_kind(std::string_view name) {
    if (name == "spikes") {
        return ScenarioKind::spikes;
    }
    if (name == "mean_shift") {
        return ScenarioKind::mean_shift;
    }
    if (name == "packet_loss") {
        return ScenarioKind::packet_loss;
    }
    if (name == "drift") {
        return ScenarioKind::drift;
    }
    throw std::invalid_argument("unknown scenario kind '" + std::string(name) + "'");
}

std::string_view scenario_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::spikes: return "spikes";
        case ScenarioKind::mean_shift: return "mean_shift";
        case ScenarioKind::packet_loss: return "packet_loss";
        case ScenarioKind::drift: return "drift";
    }
    return "unknown";
}

void SynthParams::validate(ScenarioKind kind) const {
    if (dim == 0 || samples < 2) {
        throw std::invalid_argument("synth: need dim >= 1 and at least two samples");
    }
    if (!(interval > 0.0) || !(noise_sigma > 0.0)) {
        throw std::invalid_argument("synth: interval and noise sigma must be positive");
    }
    if (dim > 1 && !(correlation > -1.0 / static_cast<double>(dim - 1) && correlation < 1.0)) {
        throw std::invalid_argument("synth: correlation does not give a positive definite covariance");
    }
    switch (kind) {
        case ScenarioKind::spikes:
            if (quiet_prefix >= samples || spikes > samples - quiet_prefix) {
                throw std::invalid_argument("synth: not enough samples after the quiet prefix for the spikes");
            }
            if (spike_sign < -1 || spike_sign > 1) {
                throw std::invalid_argument("synth: spike sign must be -1, 0 or +1");
            }
            break;
        case ScenarioKind::mean_shift:
            if (shift_index == 0 || shift_index >= samples) {
                throw std::invalid_argument("synth: shift index must fall inside the stream");
            }
            break;
        case ScenarioKind::packet_loss:
            if (gap_index == 0 || gap_index >= samples || gap_steps < 2) {
                throw std::invalid_argument("synth: gap must fall inside the stream and span at least two steps");
            }
            break;
        case ScenarioKind::drift:
            break;
    }
}

LabeledStream synth_scenario(ScenarioKind kind, const SynthParams& p, std::uint64_t seed) {
    p.validate(kind);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto k = static_cast<Eigen::Index>(p.dim);
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(k, k, p.correlation);
    corr.diagonal().setOnes();
    const Eigen::MatrixXd chol = corr.llt().matrixL();

    LabeledStream out;
    out.name = std::string(scenario_name(kind));
    out.observations.resize(p.samples);
    out.labels.assign(p.samples, 0);

    std::vector<double> offset(p.samples, 0.0);
    switch (kind) {
        case ScenarioKind::spikes: {
            std::vector<std::size_t> candidates(p.samples - p.quiet_prefix);
            std::iota(candidates.begin(), candidates.end(), p.quiet_prefix);
            std::shuffle(candidates.begin(), candidates.end(), rng);
            for (std::size_t i = 0; i < p.spikes; ++i) {
                const std::size_t idx = candidates[i];
                double sign = static_cast<double>(p.spike_sign);
                if (sign == 0.0) {
                    sign = (rng() & 1U) != 0 ? 1.0 : -1.0;
                }
                offset[idx] = sign * p.spike_sigma;
                out.labels[idx] = 1;
            }
            break;
        }
        case ScenarioKind::mean_shift:
            for (std::size_t i = p.shift_index; i < p.samples; ++i) {
                offset[i] = p.shift_sigma;
                if (i < p.shift_index + p.transient_samples) {
                    out.labels[i] = 1;
                }
            }
            break;
        case ScenarioKind::packet_loss:
            out.labels[p.gap_index] = 1;
            break;
        case ScenarioKind::drift:
            for (std::size_t i = 0; i < p.samples; ++i) {
                offset[i] = p.drift_per_sample * static_cast<double>(i);
            }
            break;
    }

    for (std::size_t i = 0; i < p.samples; ++i) {
        Eigen::VectorXd z(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            z[j] = normal(rng);
        }
        Observation& obs = out.observations[i];
        obs.values = p.noise_sigma * (chol * z + Eigen::VectorXd::Constant(k, offset[i]));
        double steps = static_cast<double>(i);
        if (kind == ScenarioKind::packet_loss && i >= p.gap_index) {
            steps += static_cast<double>(p.gap_steps - 1);
        }
        obs.timestamp = p.start + steps * p.interval;
    }
    return out;
}

void write_labeled_csv(std::ostream& out, const LabeledStream& stream) {
    stream.validate();
    if (stream.observations.empty()) {
        throw std::invalid_argument("write_labeled_csv: empty stream");
    }
    const auto k = stream.observations.front().values.size();
    out << "timestamp";
    for (Eigen::Index j = 0; j < k; ++j) {
        out << ",x" << j;
    }
    out << ",label\n";
    char buf[32];
    for (std::size_t i = 0; i < stream.observations.size(); ++i) {
        const Observation& obs = stream.observations[i];
        out << format_iso8601(obs.timestamp);
        for (Eigen::Index j = 0; j < k; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", obs.values[j]);
            out << ',' << buf;
        }
        out << ',' << static_cast<int>(stream.labels[i]) << '\n';
    }
    if (!out) {
        throw IoError("failed to write labeled stream");
    }
}

std::vector<LabeledStream> load_skab(const std::string& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::exists(root, ec)) {
        throw IoError("SKAB directory '" + root + "' does not exist");
    }
    std::vector<fs::path> files;
    if (fs::is_regular_file(root, ec)) {
        files.emplace_back(root);
    } else {
        for (const auto& entry : fs::recursive_directory_iterator(root, ec)) {
            if (entry.is_regular_file() && entry.path().extension() == ".csv") {
                files.push_back(entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<LabeledStream> streams;
    for (const auto& path : files) {
        std::ifstream in(path);
        std::string header;
        if (!in || !std::getline(in, header)) {
            continue;
        }
        StreamSchema schema;
        schema.timestamp_column = "datetime";
        schema.delimiter = ';';
        schema.label_column = "anomaly";
        std::vector<std::string> columns;
        bool has_label = false;
        bool has_time = false;
        std::string current;
        std::istringstream fields(header);
        while (std::getline(fields, current, ';')) {
            while (!current.empty() && (current.back() == '\r' || current.back() == ' ')) {
                current.pop_back();
            }
            if (current == "anomaly") {
                has_label = true;
            } else if (current == "datetime") {
                has_time = true;
            } else if (current != "changepoint") {
                columns.push_back(current);
            }
        }
        if (!has_label || !has_time || columns.empty()) {
            continue;
        }
        schema.value_columns = columns;
        in.clear();
        in.seekg(0);
        StreamData data = read_stream(in, schema);
        LabeledStream stream;
        stream.name = path.string();
        stream.observations = std::move(data.observations);
        stream.labels = std::move(data.labels);
        streams.push_back(std::move(stream));
    }
    if (streams.empty()) {
        throw IoError("no labelled SKAB files found under '" + root + "'");
    }
    return streams;
}

nlohmann::json report_to_json(const MetricsReport& r) {
    return {{"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"tn", r.tn},
            {"samples", r.samples},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"avg_latency_ms", r.avg_latency_ms},
            {"degenerate", r.degenerate}};
}

void print_report_table(std::ostream& out, const MetricsReport& r, std::string_view title) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "| %-18s | %10s |\n", "Metric", std::string(title).c_str());
    out << buf;
    out << "|--------------------|------------|\n";
    std::snprintf(buf, sizeof buf, "| %-18s | %10.2f |\n", "F1 [%]", 100.0 * r.f1);
    out << buf;
    std::snprintf(buf, sizeof buf, "| %-18s | %10.2f |\n", "Recall [%]", 100.0 * r.recall);
    out << buf;
    std::snprintf(buf, sizeof buf, "| %-18s | %10.2f |\n", "Precision [%]", 100.0 * r.precision);
    out << buf;
    std::snprintf(buf, sizeof buf, "| %-18s | %10.3f |\n", "Avg. Latency [ms]", r.avg_latency_ms);
    out << buf;
}

}  // namespace raid
