#include "raid/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "raid/detector.hpp"
#include "raid/evaluation.hpp"
#include "raid/stream_io.hpp"

namespace raid::cli {
namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InputFlags {
    std::string input;
    std::string timestamp_column = "timestamp";
    std::vector<std::string> value_columns;
    std::string timestamp_format = "iso8601";
    std::string delimiter = ",";
    std::string input_format = "auto";
    std::string label_column;
};

struct DetectorFlags {
    std::string expiration_period;
    double threshold = -25.0;
    std::string adaptation_period;
    std::string grace_period;
    double q = 0.9973;
    std::uint64_t seed = 0;
    bool two_sided = false;
    std::string score_mode = "joint";
    std::size_t qmc_points = QmcOptions{}.max_points;
    double qmc_error = QmcOptions{}.target_error;
};

const auto kDurationCheck = CLI::Validator(
    [](std::string& value) -> std::string {
        return parse_duration(value) ? std::string{} : "invalid duration '" + value + "' (use e.g. 90s, 15m, 2h, 4d)";
    },
    "DURATION");

void add_input_flags(CLI::App& app, InputFlags& f, bool label_required) {
    app.add_option("--input", f.input, "Input CSV or JSON-lines file ('-' for stdin)")->required();
    app.add_option("--timestamp-column", f.timestamp_column, "Timestamp column name")->capture_default_str();
    app.add_option("--value-columns", f.value_columns, "Comma separated value columns (default: all others)")
        ->delimiter(',');
    app.add_option("--timestamp-format", f.timestamp_format, "iso8601 | epoch_seconds | epoch_millis")
        ->check(CLI::IsMember({"iso8601", "epoch_seconds", "epoch_millis"}))
        ->capture_default_str();
    app.add_option("--delimiter", f.delimiter, "CSV delimiter: a single character, 'semicolon' or 'tab'")
        ->capture_default_str();
    app.add_option("--input-format", f.input_format, "auto | csv | jsonl")
        ->check(CLI::IsMember({"auto", "csv", "jsonl"}))
        ->capture_default_str();
    auto* label = app.add_option("--label-column", f.label_column, "Column holding 0/1 ground-truth labels");
    if (label_required) {
        label->required();
    }
}

void add_detector_flags(CLI::App& app, DetectorFlags& f, bool threshold_required) {
    app.add_option("--expiration-period", f.expiration_period, "Model memory, e.g. 4d")
        ->required()
        ->check(kDurationCheck);
    auto* threshold = app.add_option("--threshold", f.threshold, "Log-CDF threshold T");
    if (threshold_required) {
        threshold->required();
    } else {
        threshold->capture_default_str();
    }
    app.add_option("--adaptation-period", f.adaptation_period, "Default: expiration period / 4")->check(kDurationCheck);
    app.add_option("--grace-period", f.grace_period, "Default: 3/4 of the expiration period")
        ->check(CLI::Validator(
            [](std::string& v) -> std::string {
                return v == "0" || parse_duration(v) ? std::string{} : "invalid duration '" + v + "'";
            },
            "DURATION"));
    app.add_option("--q", f.q, "Probability mass between the process limits")
        ->check(CLI::Range(0.5, 1.0))
        ->capture_default_str();
    app.add_option("--seed", f.seed, "Seed of the quasi-Monte Carlo randomization")->capture_default_str();
    app.add_flag("--two-sided", f.two_sided, "Score with log(2 min(F, 1-F))");
    app.add_option("--score-mode", f.score_mode, "joint | independent")
        ->check(CLI::IsMember({"joint", "independent"}))
        ->capture_default_str();
    app.add_option("--qmc-points", f.qmc_points, "Maximum quasi-Monte Carlo points per CDF")->capture_default_str();
    app.add_option("--qmc-error", f.qmc_error, "Target standard error of the CDF")->capture_default_str();
}

char resolve_delimiter(const std::string& text) {
    if (text == "semicolon") {
        return ';';
    }
    if (text == "comma") {
        return ',';
    }
    if (text == "tab" || text == "\\t") {
        return '\t';
    }
    if (text.size() != 1) {
        throw UsageError("--delimiter must be a single character, 'semicolon' or 'tab'");
    }
    return text.front();
}

StreamSchema make_schema(const InputFlags& f) {
    StreamSchema schema;
    schema.timestamp_column = f.timestamp_column;
    schema.value_columns = f.value_columns;
    schema.timestamp_format = parse_timestamp_format(f.timestamp_format);
    schema.delimiter = resolve_delimiter(f.delimiter);
    if (!f.label_column.empty()) {
        schema.label_column = f.label_column;
    }
    return schema;
}

DetectorConfig make_config(const DetectorFlags& f) {
    DetectorConfig c;
    c.expiration_period = *parse_duration(f.expiration_period);
    c.threshold = f.threshold;
    if (!f.adaptation_period.empty()) {
        c.adaptation_period = *parse_duration(f.adaptation_period);
    }
    if (!f.grace_period.empty()) {
        c.grace_period = f.grace_period == "0" ? 0.0 : *parse_duration(f.grace_period);
    }
    c.q = f.q;
    c.qmc.seed = f.seed;
    c.qmc.max_points = f.qmc_points;
    c.qmc.target_error = f.qmc_error;
    c.two_sided_score = f.two_sided;
    c.score_mode = f.score_mode == "independent" ? ScoreMode::independent : ScoreMode::joint;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

StreamData load_input(const InputFlags& f, std::istream& in, std::ostream& err) {
    const StreamSchema schema = make_schema(f);
    StreamData data;
    if (f.input == "-") {
        const InputFormat fmt = f.input_format == "jsonl" ? InputFormat::jsonl : InputFormat::csv;
        data = read_stream(in, schema, fmt);
    } else if (f.input_format == "auto") {
        data = read_stream_file(f.input, schema);
    } else {
        std::ifstream file(f.input);
        if (!file) {
            throw IoError("cannot open '" + f.input + "'");
        }
        data = read_stream(file, schema, f.input_format == "jsonl" ? InputFormat::jsonl : InputFormat::csv);
    }
    if (data.malformed_rows > 0) {
        err << "warning: skipped " << data.malformed_rows << " malformed row(s)\n";
    }
    if (data.out_of_order_rows > 0) {
        err << "warning: skipped " << data.out_of_order_rows << " row(s) with non-increasing timestamps\n";
    }
    return data;
}

// Opens `path` for writing, or returns `fallback` for "-".
class OutputTarget {
public:
    OutputTarget(const std::string& path, std::ostream& fallback) {
        if (path.empty() || path == "-") {
            stream_ = &fallback;
        } else {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) {
                throw IoError("cannot open '" + path + "' for writing");
            }
            stream_ = file_.get();
        }
    }
    std::ostream& get() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

int cmd_run(const InputFlags& input, const DetectorFlags& flags, const std::string& output,
            const std::string& snapshot_in, const std::string& snapshot_out, std::istream& in, std::ostream& out,
            std::ostream& err) {
    const DetectorConfig config = make_config(flags);
    const StreamData data = load_input(input, in, err);

    std::optional<Detector> detector;
    std::size_t next = 0;
    OutputTarget target(output, out);
    std::size_t written = 0;
    std::size_t anomalies = 0;
    std::size_t changepoints = 0;
    std::size_t sampling = 0;
    const auto emit = [&](const DetectionRecord& rec) {
        write_record(target.get(), rec);
        ++written;
        anomalies += rec.y_g ? 1 : 0;
        changepoints += rec.y_c ? 1 : 0;
        sampling += rec.y_t ? 1 : 0;
    };

    if (!snapshot_in.empty()) {
        std::ifstream file(snapshot_in);
        if (!file) {
            throw IoError("cannot open snapshot '" + snapshot_in + "'");
        }
        const auto doc = nlohmann::json::parse(file, nullptr, false);
        if (doc.is_discarded()) {
            throw SnapshotError("snapshot '" + snapshot_in + "' is not valid JSON");
        }
        detector.emplace(snapshot_load(doc));
    } else {
        detector.emplace(config, data.observations.front());
        emit(*detector->initial_record());
        next = 1;
    }
    for (; next < data.observations.size(); ++next) {
        emit(detector->step(data.observations[next]));
    }
    target.get().flush();
    if (!target.get()) {
        throw IoError("failed to write records");
    }
    if (!snapshot_out.empty()) {
        std::ofstream file(snapshot_out);
        file << snapshot_save(*detector).dump() << '\n';
        if (!file) {
            throw IoError("cannot write snapshot '" + snapshot_out + "'");
        }
    }
    err << "records: " << written << ", anomalies: " << anomalies << ", changepoints: " << changepoints
        << ", sampling anomalies: " << sampling << '\n';
    return kExitOk;
}

std::vector<LabeledStream> load_labeled(const InputFlags& f, std::istream& in, std::ostream& err) {
    if (f.input != "-" && std::filesystem::is_directory(f.input)) {
        return load_skab(f.input);
    }
    StreamData data = load_input(f, in, err);
    LabeledStream stream;
    stream.name = f.input;
    stream.observations = std::move(data.observations);
    stream.labels = std::move(data.labels);
    return {std::move(stream)};
}

int cmd_bench(const InputFlags& input, const DetectorFlags& flags, bool exclude_grace, std::istream& in,
              std::ostream& out, std::ostream& err) {
    const DetectorConfig config = make_config(flags);
    const auto streams = load_labeled(input, in, err);
    const MetricsReport report = score_runs(config, streams, ScoreOptions{exclude_grace});
    print_report_table(out, report, "RAID");
    nlohmann::json doc = report_to_json(report);
    doc["threshold"] = config.threshold;
    doc["streams"] = streams.size();
    out << doc.dump() << '\n';
    return kExitOk;
}

int cmd_sweep(const InputFlags& input, const DetectorFlags& flags, const std::vector<double>& grid,
              bool exclude_grace, std::istream& in, std::ostream& out, std::ostream& err) {
    const DetectorConfig config = make_config(flags);
    const auto streams = load_labeled(input, in, err);
    const SweepResult result = sweep_threshold(config, streams, grid, ScoreOptions{exclude_grace});
    char buf[160];
    out << "| Threshold  | F1 [%]  | Recall [%] | Precision [%] |\n";
    out << "|------------|---------|------------|---------------|\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.rows) {
        std::snprintf(buf, sizeof buf, "| %10.4g | %7.2f | %10.2f | %13.2f |\n", row.threshold, 100.0 * row.report.f1,
                      100.0 * row.report.recall, 100.0 * row.report.precision);
        out << buf;
        nlohmann::json j = report_to_json(row.report);
        j["threshold"] = row.threshold;
        rows.push_back(std::move(j));
    }
    nlohmann::json doc = {{"best_threshold", result.best_threshold},
                          {"best", report_to_json(result.best)},
                          {"rows", std::move(rows)}};
    out << doc.dump() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Streaming multivariate anomaly detection with root-cause isolation", "raid"};
    app.require_subcommand(1, 1);

    InputFlags run_input;
    DetectorFlags run_flags;
    std::string run_output = "-";
    std::string snapshot_in;
    std::string snapshot_out;
    auto* run = app.add_subcommand("run", "Stream observations through one detector and emit JSON-lines records");
    add_input_flags(*run, run_input, false);
    add_detector_flags(*run, run_flags, true);
    run->add_option("--output", run_output, "Records file ('-' for stdout)")->capture_default_str();
    run->add_option("--snapshot-in", snapshot_in, "Resume from a detector snapshot");
    run->add_option("--snapshot-out", snapshot_out, "Write the final detector state here");

    InputFlags bench_input;
    DetectorFlags bench_flags;
    bool bench_exclude_grace = false;
    auto* bench = app.add_subcommand("bench", "Score a labelled stream (or a SKAB directory) against its labels");
    add_input_flags(*bench, bench_input, false);
    add_detector_flags(*bench, bench_flags, false);
    bench->add_flag("--exclude-grace", bench_exclude_grace, "Leave grace-period samples out of the metrics");

    InputFlags sweep_input;
    DetectorFlags sweep_flags;
    std::vector<double> grid;
    bool sweep_exclude_grace = false;
    auto* sweep = app.add_subcommand("sweep", "Grid search of the threshold by F1");
    add_input_flags(*sweep, sweep_input, false);
    add_detector_flags(*sweep, sweep_flags, false);
    sweep->add_option("--thresholds", grid, "Comma separated threshold grid")->required()->delimiter(',');
    sweep->add_flag("--exclude-grace", sweep_exclude_grace, "Leave grace-period samples out of the metrics");

    std::string kind;
    std::uint64_t seed = 0;
    std::string synth_output = "-";
    SynthParams params;
    long spike_sign = 0;
    auto* synth = app.add_subcommand("synth", "Write a labelled synthetic scenario as CSV");
    synth->add_option("--kind", kind, "spikes | mean_shift | packet_loss | drift")
        ->required()
        ->check(CLI::IsMember({"spikes", "mean_shift", "packet_loss", "drift"}));
    synth->add_option("--seed", seed, "Random seed")->required();
    synth->add_option("--output", synth_output, "Output CSV ('-' for stdout)")->capture_default_str();
    synth->add_option("--samples", params.samples)->capture_default_str();
    synth->add_option("--dim", params.dim)->capture_default_str();
    synth->add_option("--interval", params.interval, "Sampling interval in seconds")->capture_default_str();
    synth->add_option("--start", params.start, "First timestamp, seconds since the epoch")->capture_default_str();
    synth->add_option("--correlation", params.correlation)->capture_default_str();
    synth->add_option("--noise-sigma", params.noise_sigma)->capture_default_str();
    synth->add_option("--spikes", params.spikes)->capture_default_str();
    synth->add_option("--spike-sigma", params.spike_sigma)->capture_default_str();
    synth->add_option("--spike-sign", spike_sign, "-1, +1, or 0 for random")->capture_default_str();
    synth->add_option("--quiet-prefix", params.quiet_prefix)->capture_default_str();
    synth->add_option("--shift-index", params.shift_index)->capture_default_str();
    synth->add_option("--shift-sigma", params.shift_sigma)->capture_default_str();
    synth->add_option("--transient", params.transient_samples)->capture_default_str();
    synth->add_option("--gap-index", params.gap_index)->capture_default_str();
    synth->add_option("--gap-steps", params.gap_steps)->capture_default_str();
    synth->add_option("--drift", params.drift_per_sample, "Mean drift per sample in sigmas")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) {
            return cmd_run(run_input, run_flags, run_output, snapshot_in, snapshot_out, in, out, err);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_input, bench_flags, bench_exclude_grace, in, out, err);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_input, sweep_flags, grid, sweep_exclude_grace, in, out, err);
        }
        if (synth->parsed()) {
            params.spike_sign = static_cast<int>(spike_sign);
            const ScenarioKind scenario = parse_scenario_kind(kind);
            LabeledStream stream;
            try {
                stream = synth_scenario(scenario, params, seed);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            OutputTarget target(synth_output, out);
            write_labeled_csv(target.get(), stream);
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace raid::cli
