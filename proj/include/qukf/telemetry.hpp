#pragma once

// Telemetry and metrics serialization.
//
// CSV: one header row whose column names carry their unit in brackets,
// then one row per record. Doubles are written as the shortest decimal
// that round-trips. Estimator columns appear only for estimators that ran.
// JSON lines: a schema/units line, then one object per record.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qukf/config.hpp"
#include "qukf/metrics.hpp"

namespace qukf {

enum class TelemetryFormat { kCsv, kJsonLines };

/// Throws Error(kInvalidArgument) for anything other than "csv" / "jsonl".
TelemetryFormat parse_format(const std::string& name);
std::string extension(TelemetryFormat format);

/// Column names in output order for the given estimator presence.
std::vector<std::string> csv_columns(bool with_qukf, bool with_ekf);

void write_csv(std::ostream& out, const std::vector<TelemetryRecord>& records);
std::vector<TelemetryRecord> read_csv(std::istream& in);
void write_jsonl(std::ostream& out, const std::vector<TelemetryRecord>& records);
std::vector<TelemetryRecord> read_jsonl(std::istream& in);

/// Throws Error(kIoError) with the path on failure, kInvalidArgument on
/// empty input.
void write_telemetry(const std::vector<TelemetryRecord>& records,
                     const std::filesystem::path& path, TelemetryFormat format);
std::vector<TelemetryRecord> read_telemetry(const std::filesystem::path& path,
                                            TelemetryFormat format);

/// Metrics plus config digest and code version, as pretty-printed JSON.
/// Wall-clock timings are left out so the document is reproducible.
std::string metrics_document(const MetricsReport& report, const ScenarioConfig& config);
void write_text(const std::filesystem::path& path, const std::string& text);

extern const char* const kVersion;

}  // namespace qukf
