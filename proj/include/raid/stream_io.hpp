#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "raid/detector.hpp"

namespace raid {

/// Schema problems the caller can fix by naming columns differently.
class SchemaError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Unreadable input, unwritable output, or an input without usable rows.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corrupted or incompatible detector snapshot.
class SnapshotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TimestampFormat { iso8601, epoch_seconds, epoch_millis };

/// Parses "iso8601", "epoch_seconds" or "epoch_millis".
[[nodiscard]] TimestampFormat parse_timestamp_format(std::string_view name);

/// Parses a timestamp into seconds since the Unix epoch; std::nullopt when malformed.
/// ISO-8601 accepts "YYYY-MM-DD", "YYYY-MM-DD[T ]hh:mm[:ss[.fff]]" and an optional
/// "Z" or +hh:mm / -hh:mm offset. Times without an offset are taken as UTC.
[[nodiscard]] std::optional<Seconds> parse_timestamp(std::string_view text, TimestampFormat format);

/// Formats seconds since the epoch as "YYYY-MM-DDThh:mm:ss[.ffffff]Z".
[[nodiscard]] std::string format_iso8601(Seconds t);

/// Parses "90", "90s", "15m", "1.5h", "4d" into seconds; std::nullopt when malformed
/// or not positive.
[[nodiscard]] std::optional<Seconds> parse_duration(std::string_view text);

enum class InputFormat { csv, jsonl };

struct StreamSchema {
    std::string timestamp_column = "timestamp";
    /// Empty selects every column except the timestamp and label columns.
    std::vector<std::string> value_columns;
    TimestampFormat timestamp_format = TimestampFormat::iso8601;
    char delimiter = ',';
    /// When set, the column is read as a 0/1 label instead of a value.
    std::optional<std::string> label_column;

    /// Throws SchemaError for duplicate value columns or a timestamp/label
    /// column listed among the values.
    void validate() const;
};

struct StreamData {
    std::vector<Observation> observations;
    /// Parallel to observations; empty unless the schema names a label column.
    std::vector<std::uint8_t> labels;
    std::vector<std::string> value_columns;
    /// Rows dropped for an unparseable timestamp, value or label.
    std::size_t malformed_rows = 0;
    /// Rows dropped because their timestamp did not increase.
    std::size_t out_of_order_rows = 0;
};

/// Reads a CSV (header row required) or JSON-lines stream in file order.
/// Throws SchemaError when a named column is missing and IoError when no row
/// could be parsed.
[[nodiscard]] StreamData read_stream(std::istream& in, const StreamSchema& schema,
                                     InputFormat format = InputFormat::csv);
/// Picks the format from the extension (.jsonl / .ndjson are JSON-lines).
[[nodiscard]] StreamData read_stream_file(const std::string& path, const StreamSchema& schema);

[[nodiscard]] nlohmann::json record_to_json(const DetectionRecord& record);
[[nodiscard]] DetectionRecord record_from_json(const nlohmann::json& j);

/// One JSON object per line with keys ts, score, y_g, y_s, y_t, y_c, x_l, x_u,
/// in_grace, n. Returns the number of lines written; throws IoError when the
/// sink fails.
std::size_t write_records(std::ostream& out, const std::vector<DetectionRecord>& records);
void write_record(std::ostream& out, const DetectionRecord& record);
[[nodiscard]] std::vector<DetectionRecord> read_records(std::istream& in);

inline constexpr int kSnapshotVersion = 1;

/// Self-describing document holding the full detector state. Doubles are
/// written in shortest round-trip form, so a restored detector continues
/// bit-identically.
[[nodiscard]] nlohmann::json snapshot_save(const Detector& detector);
/// Throws SnapshotError for an unknown format/version or inconsistent shapes.
[[nodiscard]] Detector snapshot_load(const nlohmann::json& document);

[[nodiscard]] nlohmann::json config_to_json(const DetectorConfig& config);
[[nodiscard]] DetectorConfig config_from_json(const nlohmann::json& j);

}  // namespace raid
