#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "detkit/box.hpp"

namespace detkit {

struct GroundTruth {
    std::string image_id;
    int class_id = 0;
    BBox bbox;
};

struct EvalDetection {
    std::string image_id;
    int class_id = 0;
    BBox bbox;
    double score = 0;
};

struct ClassCounts {
    std::int64_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
    std::vector<double> thresholds;
    std::map<int, std::vector<double>> per_class_ap;      // class -> AP per threshold
    std::map<int, std::vector<ClassCounts>> counts;       // class -> counts per threshold
    std::vector<double> map_per_threshold;                // macro mean over GT classes
    double map50 = std::numeric_limits<double>::quiet_NaN();
    double map50_95 = std::numeric_limits<double>::quiet_NaN();  // mean over the threshold set
};

struct MatchResult {
    std::vector<bool> tp;  // aligned with the input detections
    std::int64_t fn = 0;
};

/// Greedy matching of one class's detections (pre-sorted by descending
/// score, ties in stable input order) against that class's ground truths.
/// Each detection takes the highest-IoU unmatched ground truth in its image;
/// the match is a TP iff that IoU reaches the threshold. Each ground truth
/// matches at most once.
MatchResult match_for_ap(std::span<const EvalDetection> detections,
                         std::span<const GroundTruth> ground_truths, double iou_threshold);

/// 101-point interpolated average precision from ranked TP/FP labels.
double average_precision(const std::vector<bool>& tp_flags, std::int64_t n_gt);

/// Full evaluation: per-class AP at every threshold, macro-averaged mAP.
/// Classes with no ground truth are excluded from the mean; detections of
/// such classes are ignored with a warning to `warnings` when given.
EvalReport evaluate(std::vector<EvalDetection> detections, std::span<const GroundTruth> gts,
                    std::span<const double> thresholds, std::ostream* warnings = nullptr);

/// The default COCO-style threshold grid 0.50:0.05:0.95.
std::vector<double> default_thresholds();

/// Report as CSV: one (class, threshold, ap) row per cell, then a summary
/// block with map50 and map50_95.
void write_report_csv(const EvalReport& report, std::ostream& out);

}  // namespace detkit
