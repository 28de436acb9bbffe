#include "detkit/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace detkit {

namespace {

[[noreturn]] void fail(const std::string& file, int line_no, const std::string& what) {
    throw io_error(file + ":" + std::to_string(line_no) + ": " + what);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    return in;
}

}  // namespace

FileRecord parse_record(const std::string& line, const std::string& file, int line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        fail(file, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(file, line_no, "record must be a JSON object");

    FileRecord rec;
    try {
        if (j.contains("image_id")) rec.image_id = j.at("image_id").get<std::string>();
        if (j.contains("frame_id")) rec.frame_id = j.at("frame_id").get<std::int64_t>();
        if (j.contains("score")) rec.score = j.at("score").get<double>();
        if (j.contains("track_id")) rec.track_id = j.at("track_id").get<std::int64_t>();
        rec.class_id = j.at("class_id").get<int>();
        const auto& box = j.at("bbox");
        if (!box.is_array() || box.size() != 4) fail(file, line_no, "bbox must be [x1,y1,x2,y2]");
        rec.bbox = BBox{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                        box[3].get<double>()};
    } catch (const nlohmann::json::exception& e) {
        fail(file, line_no, std::string("bad record field: ") + e.what());
    }

    if (rec.class_id < 0) fail(file, line_no, "class_id must be nonnegative");
    if (rec.frame_id && *rec.frame_id < 0) fail(file, line_no, "frame_id must be nonnegative");
    if (!rec.bbox.valid()) fail(file, line_no, "bbox is degenerate (needs x2 > x1 and y2 > y1)");
    if (rec.score && !(*rec.score >= 0.0 && *rec.score <= 1.0))
        fail(file, line_no, "score must lie in [0, 1]");
    return rec;
}

std::string serialize_record(const FileRecord& rec) {
    nlohmann::json j;
    if (rec.image_id) j["image_id"] = *rec.image_id;
    if (rec.frame_id) j["frame_id"] = *rec.frame_id;
    j["class_id"] = rec.class_id;
    j["bbox"] = {rec.bbox.x1, rec.bbox.y1, rec.bbox.x2, rec.bbox.y2};
    if (rec.score) j["score"] = *rec.score;
    if (rec.track_id) j["track_id"] = *rec.track_id;
    return j.dump();
}

std::vector<FileRecord> read_jsonl(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<FileRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        records.push_back(parse_record(line, path, line_no));
    }
    return records;
}

void write_jsonl(const std::string& path, const std::vector<FileRecord>& records) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    for (const FileRecord& rec : records) out << serialize_record(rec) << '\n';
}

std::vector<GroundTruth> read_ground_truths(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<GroundTruth> gts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        FileRecord rec = parse_record(line, path, line_no);
        if (!rec.image_id) fail(path, line_no, "ground-truth record needs image_id");
        gts.push_back({std::move(*rec.image_id), rec.class_id, rec.bbox});
    }
    return gts;
}

std::vector<EvalDetection> read_predictions(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<EvalDetection> dets;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        FileRecord rec = parse_record(line, path, line_no);
        if (!rec.image_id) fail(path, line_no, "prediction record needs image_id");
        if (!rec.score) fail(path, line_no, "prediction record needs score");
        dets.push_back({std::move(*rec.image_id), rec.class_id, rec.bbox, *rec.score});
    }
    return dets;
}

StreamRecords read_stream(const std::string& path) {
    std::ifstream in = open_input(path);
    StreamRecords out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        FileRecord rec = parse_record(line, path, line_no);
        if (!rec.frame_id) fail(path, line_no, "stream record needs frame_id");
        if (!rec.score) fail(path, line_no, "stream record needs score");
        out.detections.push_back({*rec.frame_id, rec.class_id, rec.bbox, *rec.score});
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::string fmt9(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        if (!line.empty() && line.back() == ',') row.emplace_back();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detkit
