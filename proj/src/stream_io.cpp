#include "raid/stream_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace raid {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
    const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
    while (!s.empty() && !not_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && !not_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    if (text.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

template <typename Int>
bool parse_fixed(std::string_view text, std::size_t pos, std::size_t len, Int& out) {
    if (pos + len > text.size()) {
        return false;
    }
    const char* first = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc{} && ptr == first + len;
}

std::optional<Seconds> parse_iso8601(std::string_view text) {
    text = trim(text);
    int y = 0;
    unsigned mo = 0;
    unsigned d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-' || !parse_fixed(text, 0, 4, y) ||
        !parse_fixed(text, 5, 2, mo) || !parse_fixed(text, 8, 2, d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    double seconds = static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count()) * 86400.0;
    std::string_view rest = text.substr(10);
    if (rest.empty()) {
        return seconds;
    }
    if (rest.front() != 'T' && rest.front() != ' ') {
        return std::nullopt;
    }
    rest.remove_prefix(1);
    int hh = 0;
    int mm = 0;
    if (rest.size() < 5 || rest[2] != ':' || !parse_fixed(rest, 0, 2, hh) || !parse_fixed(rest, 3, 2, mm) ||
        hh > 23 || mm > 59) {
        return std::nullopt;
    }
    double ss = 0.0;
    rest.remove_prefix(5);
    if (!rest.empty() && rest.front() == ':') {
        std::size_t end = 1;
        while (end < rest.size() && (std::isdigit(static_cast<unsigned char>(rest[end])) || rest[end] == '.')) {
            ++end;
        }
        const auto sec = parse_number(rest.substr(1, end - 1));
        if (!sec || *sec < 0.0 || *sec >= 61.0 || end < 3) {
            return std::nullopt;
        }
        ss = *sec;
        rest.remove_prefix(end);
    }
    double offset = 0.0;
    if (rest == "Z" || rest == "z") {
        rest = {};
    } else if (!rest.empty() && (rest.front() == '+' || rest.front() == '-')) {
        const double sign = rest.front() == '-' ? -1.0 : 1.0;
        rest.remove_prefix(1);
        int oh = 0;
        int om = 0;
        if (rest.size() == 5 && rest[2] == ':' && parse_fixed(rest, 0, 2, oh) && parse_fixed(rest, 3, 2, om)) {
        } else if (rest.size() == 4 && parse_fixed(rest, 0, 2, oh) && parse_fixed(rest, 2, 2, om)) {
        } else if (rest.size() == 2 && parse_fixed(rest, 0, 2, oh)) {
        } else {
            return std::nullopt;
        }
        offset = sign * (oh * 3600.0 + om * 60.0);
        rest = {};
    }
    if (!rest.empty()) {
        return std::nullopt;
    }
    return seconds + hh * 3600.0 + mm * 60.0 + ss - offset;
}

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.emplace_back(trim(current));
    return fields;
}

// Resolves value columns against the available names, keeping file order
// when none were requested.
std::vector<std::string> resolve_columns(const StreamSchema& schema, const std::vector<std::string>& available) {
    const std::set<std::string> names(available.begin(), available.end());
    if (!names.count(schema.timestamp_column)) {
        throw SchemaError("timestamp column '" + schema.timestamp_column + "' not found");
    }
    if (schema.label_column && !names.count(*schema.label_column)) {
        throw SchemaError("label column '" + *schema.label_column + "' not found");
    }
    std::vector<std::string> columns;
    if (schema.value_columns.empty()) {
        for (const auto& name : available) {
            if (name != schema.timestamp_column && (!schema.label_column || name != *schema.label_column)) {
                columns.push_back(name);
            }
        }
        if (columns.empty()) {
            throw SchemaError("input has no value columns");
        }
        return columns;
    }
    for (const auto& name : schema.value_columns) {
        if (!names.count(name)) {
            throw SchemaError("value column '" + name + "' not found");
        }
    }
    return schema.value_columns;
}

struct RowSink {
    StreamData& data;
    const StreamSchema& schema;

    void accept(std::optional<Seconds> ts, const Eigen::VectorXd& values, bool values_ok,
                std::optional<double> label) {
        if (!ts || !values_ok || (schema.label_column && !label)) {
            ++data.malformed_rows;
            return;
        }
        if (!data.observations.empty() && !(*ts > data.observations.back().timestamp)) {
            ++data.out_of_order_rows;
            return;
        }
        data.observations.push_back({*ts, values});
        if (schema.label_column) {
            data.labels.push_back(*label != 0.0 ? 1 : 0);
        }
    }
};

StreamData read_csv(std::istream& in, const StreamSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("input is empty: header row required");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    const std::vector<std::string> header = split_csv_line(line, schema.delimiter);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) {
        index.emplace(header[i], i);
    }
    StreamData data;
    data.value_columns = resolve_columns(schema, header);
    const std::size_t ts_idx = index.at(schema.timestamp_column);
    std::vector<std::size_t> value_idx;
    for (const auto& name : data.value_columns) {
        value_idx.push_back(index.at(name));
    }
    const std::optional<std::size_t> label_idx =
        schema.label_column ? std::optional<std::size_t>(index.at(*schema.label_column)) : std::nullopt;

    RowSink sink{data, schema};
    const auto k = static_cast<Eigen::Index>(value_idx.size());
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_line(line, schema.delimiter);
        if (fields.size() != header.size()) {
            ++data.malformed_rows;
            continue;
        }
        Eigen::VectorXd values(k);
        bool ok = true;
        for (Eigen::Index j = 0; j < k && ok; ++j) {
            const auto v = parse_number(fields[value_idx[static_cast<std::size_t>(j)]]);
            ok = v.has_value();
            values[j] = v.value_or(0.0);
        }
        const auto label = label_idx ? parse_number(fields[*label_idx]) : std::nullopt;
        sink.accept(parse_timestamp(fields[ts_idx], schema.timestamp_format), values, ok, label);
    }
    return data;
}

std::optional<double> json_number(const json& v) {
    if (v.is_number()) {
        const double d = v.get<double>();
        return std::isfinite(d) ? std::optional<double>(d) : std::nullopt;
    }
    if (v.is_string()) {
        return parse_number(v.get<std::string>());
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? 1.0 : 0.0;
    }
    return std::nullopt;
}

StreamData read_jsonl(std::istream& in, const StreamSchema& schema) {
    StreamData data;
    RowSink sink{data, schema};
    std::string line;
    bool resolved = false;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded() || !row.is_object()) {
            ++data.malformed_rows;
            continue;
        }
        if (!resolved) {
            std::vector<std::string> keys;
            for (const auto& item : row.items()) {
                keys.push_back(item.key());
            }
            data.value_columns = resolve_columns(schema, keys);
            resolved = true;
        }
        std::optional<Seconds> ts;
        if (row.contains(schema.timestamp_column)) {
            const json& t = row[schema.timestamp_column];
            if (t.is_string()) {
                ts = parse_timestamp(t.get<std::string>(), schema.timestamp_format);
            } else if (auto n = json_number(t)) {
                ts = schema.timestamp_format == TimestampFormat::epoch_millis ? *n / 1000.0 : *n;
            }
        }
        Eigen::VectorXd values(static_cast<Eigen::Index>(data.value_columns.size()));
        bool ok = true;
        for (std::size_t j = 0; j < data.value_columns.size() && ok; ++j) {
            const auto it = row.find(data.value_columns[j]);
            const auto v = it != row.end() ? json_number(*it) : std::nullopt;
            ok = v.has_value();
            values[static_cast<Eigen::Index>(j)] = v.value_or(0.0);
        }
        std::optional<double> label;
        if (schema.label_column && row.contains(*schema.label_column)) {
            label = json_number(row[*schema.label_column]);
        }
        sink.accept(ts, values, ok, label);
    }
    if (!resolved) {
        throw IoError("input contains no JSON objects");
    }
    return data;
}

int flag(bool b) {
    return b ? 1 : 0;
}

bool read_flag(const json& v) {
    if (v.is_boolean()) {
        return v.get<bool>();
    }
    return v.get<int>() != 0;
}

json moments_to_json(const UnivariateMoments& m) {
    return {{"count", m.count()}, {"mean", m.mean()}, {"comoment", m.comoment()}};
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd vector_from_json(const json& j, std::size_t dim, const char* what) {
    const auto values = j.get<std::vector<double>>();
    if (values.size() != dim) {
        throw SnapshotError(std::string("snapshot: ") + what + " has length " + std::to_string(values.size()) +
                            ", expected " + std::to_string(dim));
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(dim));
}

}  // namespace

TimestampFormat parse_timestamp_format(std::string_view name) {
    if (name == "iso8601") {
        return TimestampFormat::iso8601;
    }
    if (name == "epoch_seconds") {
        return TimestampFormat::epoch_seconds;
    }
    if (name == "epoch_millis") {
        return TimestampFormat::epoch_millis;
    }
    throw SchemaError("unknown timestamp format '" + std::string(name) + "'");
}

std::optional<Seconds> parse_timestamp(std::string_view text, TimestampFormat format) {
    switch (format) {
        case TimestampFormat::iso8601:
            return parse_iso8601(text);
        case TimestampFormat::epoch_seconds:
            return parse_number(text);
        case TimestampFormat::epoch_millis:
            if (auto v = parse_number(text)) {
                return *v / 1000.0;
            }
            return std::nullopt;
    }
    return std::nullopt;
}

std::string format_iso8601(Seconds t) {
    const double whole = std::floor(t);
    const auto total = static_cast<long long>(whole);
    long long days = total / 86400;
    long long rem = total % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600, (rem / 60) % 60,
                  rem % 60);
    std::string out = buf;
    const auto micros = std::llround((t - whole) * 1e6);
    if (micros > 0 && micros < 1000000) {
        std::snprintf(buf, sizeof buf, ".%06lld", micros);
        out += buf;
        while (out.back() == '0') {
            out.pop_back();
        }
    }
    return out + "Z";
}

std::optional<Seconds> parse_duration(std::string_view text) {
    text = trim(text);
    if (text.empty()) {
        return std::nullopt;
    }
    double unit = 1.0;
    switch (text.back()) {
        case 's': unit = 1.0; break;
        case 'm': unit = 60.0; break;
        case 'h': unit = 3600.0; break;
        case 'd': unit = 86400.0; break;
        default: unit = 0.0; break;
    }
    if (unit != 0.0) {
        text.remove_suffix(1);
    } else {
        unit = 1.0;
    }
    const auto value = parse_number(text);
    if (!value || !(*value > 0.0)) {
        return std::nullopt;
    }
    return *value * unit;
}

void StreamSchema::validate() const {
    std::set<std::string> seen;
    for (const auto& name : value_columns) {
        if (!seen.insert(name).second) {
            throw SchemaError("duplicate value column '" + name + "'");
        }
        if (name == timestamp_column) {
            throw SchemaError("timestamp column '" + name + "' listed as a value column");
        }
        if (label_column && name == *label_column) {
            throw SchemaError("label column '" + name + "' listed as a value column");
        }
    }
    if (label_column && *label_column == timestamp_column) {
        throw SchemaError("label column cannot be the timestamp column");
    }
}

StreamData read_stream(std::istream& in, const StreamSchema& schema, InputFormat format) {
    schema.validate();
    StreamData data = format == InputFormat::csv ? read_csv(in, schema) : read_jsonl(in, schema);
    if (data.observations.empty()) {
        throw IoError("input contains no parseable rows");
    }
    return data;
}

StreamData read_stream_file(const std::string& path, const StreamSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    const auto ends_with = [&path](std::string_view suffix) {
        return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    const InputFormat format = ends_with(".jsonl") || ends_with(".ndjson") ? InputFormat::jsonl : InputFormat::csv;
    return read_stream(in, schema, format);
}

nlohmann::json record_to_json(const DetectionRecord& r) {
    json y_s = json::array();
    for (auto v : r.y_s) {
        y_s.push_back(static_cast<int>(v));
    }
    return {{"ts", r.timestamp},   {"score", r.score}, {"y_g", flag(r.y_g)},        {"y_s", std::move(y_s)},
            {"y_t", flag(r.y_t)},  {"y_c", flag(r.y_c)}, {"x_l", r.x_l},            {"x_u", r.x_u},
            {"in_grace", r.in_grace}, {"n", r.n}};
}

DetectionRecord record_from_json(const nlohmann::json& j) {
    DetectionRecord r;
    r.timestamp = j.at("ts").get<double>();
    r.score = j.at("score").get<double>();
    r.y_g = read_flag(j.at("y_g"));
    for (const auto& v : j.at("y_s")) {
        r.y_s.push_back(read_flag(v) ? 1 : 0);
    }
    r.y_t = read_flag(j.at("y_t"));
    r.y_c = read_flag(j.at("y_c"));
    r.x_l = j.at("x_l").get<std::vector<double>>();
    r.x_u = j.at("x_u").get<std::vector<double>>();
    r.in_grace = read_flag(j.at("in_grace"));
    r.n = j.at("n").get<std::size_t>();
    return r;
}

void write_record(std::ostream& out, const DetectionRecord& record) {
    out << record_to_json(record).dump() << '\n';
    if (!out) {
        throw IoError("failed to write detection record");
    }
}

std::size_t write_records(std::ostream& out, const std::vector<DetectionRecord>& records) {
    for (const auto& r : records) {
        write_record(out, r);
    }
    out.flush();
    if (!out) {
        throw IoError("failed to flush detection records");
    }
    return records.size();
}

std::vector<DetectionRecord> read_records(std::istream& in) {
    std::vector<DetectionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            records.push_back(record_from_json(json::parse(line)));
        }
    }
    return records;
}

nlohmann::json config_to_json(const DetectorConfig& c) {
    json j = {
        {"expiration_period", c.expiration_period},
        {"threshold", c.threshold},
        {"adaptation_period", c.adaptation_period ? json(*c.adaptation_period) : json(nullptr)},
        {"grace_period", c.grace_period ? json(*c.grace_period) : json(nullptr)},
        {"q", c.q},
        {"qmc",
         {{"max_points", c.qmc.max_points},
          {"batches", c.qmc.batches},
          {"target_error", c.qmc.target_error},
          {"seed", c.qmc.seed}}},
        {"regularization", c.regularization},
        {"two_sided_score", c.two_sided_score},
        {"score_mode", c.score_mode == ScoreMode::joint ? "joint" : "independent"},
    };
    return j;
}

DetectorConfig config_from_json(const nlohmann::json& j) {
    DetectorConfig c;
    c.expiration_period = j.at("expiration_period").get<double>();
    c.threshold = j.at("threshold").get<double>();
    if (!j.at("adaptation_period").is_null()) {
        c.adaptation_period = j.at("adaptation_period").get<double>();
    }
    if (!j.at("grace_period").is_null()) {
        c.grace_period = j.at("grace_period").get<double>();
    }
    c.q = j.at("q").get<double>();
    const json& qmc = j.at("qmc");
    c.qmc.max_points = qmc.at("max_points").get<std::size_t>();
    c.qmc.batches = qmc.at("batches").get<std::size_t>();
    c.qmc.target_error = qmc.at("target_error").get<double>();
    c.qmc.seed = qmc.at("seed").get<std::uint64_t>();
    c.regularization = j.at("regularization").get<double>();
    c.two_sided_score = j.at("two_sided_score").get<bool>();
    const auto mode = j.at("score_mode").get<std::string>();
    if (mode == "joint") {
        c.score_mode = ScoreMode::joint;
    } else if (mode == "independent") {
        c.score_mode = ScoreMode::independent;
    } else {
        throw SnapshotError("snapshot: unknown score mode '" + mode + "'");
    }
    return c;
}

nlohmann::json snapshot_save(const Detector& detector) {
    const Detector::State& s = detector.state();
    const auto k = static_cast<Eigen::Index>(s.moments.dim());
    json comoment = json::array();
    for (Eigen::Index i = 0; i < k; ++i) {
        comoment.push_back(to_vector(s.moments.comoment().row(i).transpose()));
    }
    json buffer = json::array();
    for (const auto& sample : s.buffer) {
        buffer.push_back({{"t", sample.timestamp}, {"x", to_vector(sample.values)}});
    }
    json window = json::array();
    for (const auto& e : s.window.entries()) {
        window.push_back({e.timestamp, flag(e.anomaly)});
    }
    return {
        {"format", "raid-detector-snapshot"},
        {"version", kSnapshotVersion},
        {"dim", s.moments.dim()},
        {"config", config_to_json(s.config)},
        {"start_time", s.start_time},
        {"last_time", s.last_time},
        {"moments",
         {{"count", s.moments.count()}, {"mean", to_vector(s.moments.mean())}, {"comoment", std::move(comoment)}}},
        {"buffer", std::move(buffer)},
        {"window", std::move(window)},
        {"sampling", moments_to_json(s.sampling.moments())},
    };
}

Detector snapshot_load(const nlohmann::json& doc) {
    try {
        if (!doc.is_object() || doc.value("format", std::string{}) != "raid-detector-snapshot") {
            throw SnapshotError("snapshot: not a detector snapshot document");
        }
        const int version = doc.at("version").get<int>();
        if (version != kSnapshotVersion) {
            throw SnapshotError("snapshot: unsupported version " + std::to_string(version));
        }
        const auto dim = doc.at("dim").get<std::size_t>();
        if (dim == 0) {
            throw SnapshotError("snapshot: dimension must be positive");
        }
        Detector::State s;
        s.config = config_from_json(doc.at("config"));
        s.start_time = doc.at("start_time").get<double>();
        s.last_time = doc.at("last_time").get<double>();

        const json& m = doc.at("moments");
        const json& rows = m.at("comoment");
        if (rows.size() != dim) {
            throw SnapshotError("snapshot: co-moment matrix has the wrong number of rows");
        }
        Eigen::MatrixXd comoment(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) {
            comoment.row(static_cast<Eigen::Index>(i)) = vector_from_json(rows[i], dim, "co-moment row").transpose();
        }
        s.moments = MultivariateMoments(m.at("count").get<std::size_t>(), vector_from_json(m.at("mean"), dim, "mean"),
                                        std::move(comoment));
        for (const auto& sample : doc.at("buffer")) {
            s.buffer.push_back({sample.at("t").get<double>(), vector_from_json(sample.at("x"), dim, "buffered sample")});
        }
        for (const auto& e : doc.at("window")) {
            s.window.push(e.at(0).get<double>(), read_flag(e.at(1)));
        }
        const json& samp = doc.at("sampling");
        s.sampling = SamplingMonitor(UnivariateMoments(samp.at("count").get<double>(), samp.at("mean").get<double>(),
                                                       samp.at("comoment").get<double>()));
        return Detector(std::move(s));
    } catch (const SnapshotError&) {
        throw;
    } catch (const std::exception& e) {
        throw SnapshotError(std::string("snapshot: corrupted document: ") + e.what());
    }
}

}  // namespace raid
