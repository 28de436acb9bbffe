#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/box.hpp"
#include "detkit/evaluation.hpp"
#include "detkit/smoothing.hpp"

namespace detkit {

/// File-format or parse failure; the message carries file and line number.
class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One JSONL detection/annotation record. bbox is [x1, y1, x2, y2];
/// image_id keys evaluation inputs, frame_id keys smoothing streams, score
/// is predictions-only, track_id appears in smoothed output.
struct FileRecord {
    std::optional<std::string> image_id;
    std::optional<std::int64_t> frame_id;
    int class_id = 0;
    BBox bbox;
    std::optional<double> score;
    std::optional<std::int64_t> track_id;

    bool operator==(const FileRecord&) const = default;
};

FileRecord parse_record(const std::string& line, const std::string& file, int line_no);
std::string serialize_record(const FileRecord& rec);

std::vector<FileRecord> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<FileRecord>& records);

/// Typed readers; each enforces the fields its consumer needs and reports
/// offending line numbers.
std::vector<GroundTruth> read_ground_truths(const std::string& path);
std::vector<EvalDetection> read_predictions(const std::string& path);

/// Stream records for smoothing, in file order, with their source records
/// (kept so pass-through fields survive smoothing).
struct StreamRecords {
    std::vector<Detection> detections;
    std::vector<FileRecord> records;
};
StreamRecords read_stream(const std::string& path);

/// Doubles formatted with 9 significant digits; keeps report files stable.
std::string fmt9(double value);

/// Minimal CSV reader used by report-consuming tests and tools.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

}  // namespace detkit
