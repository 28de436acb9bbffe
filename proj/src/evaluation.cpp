#include "detkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "detkit/io.hpp"

namespace detkit {

MatchResult match_for_ap(std::span<const EvalDetection> detections,
                         std::span<const GroundTruth> ground_truths, double iou_threshold) {
    MatchResult result;
    result.tp.assign(detections.size(), false);
    std::vector<bool> gt_used(ground_truths.size(), false);

    for (std::size_t d = 0; d < detections.size(); ++d) {
        const EvalDetection& det = detections[d];
        double best_iou = 0.0;
        std::size_t best_gt = ground_truths.size();
        for (std::size_t g = 0; g < ground_truths.size(); ++g) {
            if (gt_used[g] || ground_truths[g].class_id != det.class_id ||
                ground_truths[g].image_id != det.image_id)
                continue;
            const double overlap = iou(det.bbox, ground_truths[g].bbox);
            if (overlap > best_iou) {
                best_iou = overlap;
                best_gt = g;
            }
        }
        if (best_gt < ground_truths.size() && best_iou >= iou_threshold) {
            gt_used[best_gt] = true;
            result.tp[d] = true;
        }
    }
    result.fn = static_cast<std::int64_t>(ground_truths.size()) -
                static_cast<std::int64_t>(std::count(result.tp.begin(), result.tp.end(), true));
    return result;
}

double average_precision(const std::vector<bool>& tp_flags, std::int64_t n_gt) {
    if (n_gt <= 0) return 0.0;

    const std::size_t n = tp_flags.size();
    std::vector<double> precision(n), recall(n);
    std::int64_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (tp_flags[k]) ++tp;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(tp) / static_cast<double>(n_gt);
    }

    // precision envelope: best precision achievable at recall >= r
    std::vector<double> suffix_max(n);
    double running = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        running = std::max(running, precision[k]);
        suffix_max[k] = running;
    }

    double ap = 0.0;
    std::size_t k = 0;
    for (int i = 0; i <= 100; ++i) {
        const double r = static_cast<double>(i) / 100.0;
        while (k < n && recall[k] < r) ++k;  // recalls are non-decreasing
        ap += (k < n) ? suffix_max[k] : 0.0;
    }
    return ap / 101.0;
}

EvalReport evaluate(std::vector<EvalDetection> detections, std::span<const GroundTruth> gts,
                    std::span<const double> thresholds, std::ostream* warnings) {
    if (thresholds.empty()) throw std::invalid_argument("evaluate: threshold list is empty");
    for (double t : thresholds)
        if (!(t > 0.0 && t < 1.0))
            throw std::invalid_argument("evaluate: thresholds must lie in (0, 1)");

    std::set<int> gt_classes;
    for (const GroundTruth& g : gts) gt_classes.insert(g.class_id);

    // score ranking is global per class; ties keep file order so the metric
    // is a function of the input content
    std::stable_sort(detections.begin(), detections.end(),
                     [](const EvalDetection& a, const EvalDetection& b) { return a.score > b.score; });

    std::set<int> warned;
    std::map<int, std::vector<EvalDetection>> dets_by_class;
    for (const EvalDetection& d : detections) {
        if (!gt_classes.contains(d.class_id)) {
            if (warnings && warned.insert(d.class_id).second)
                *warnings << "warning: predictions for class " << d.class_id
                          << " have no ground truth; ignored\n";
            continue;
        }
        dets_by_class[d.class_id].push_back(d);
    }
    std::map<int, std::vector<GroundTruth>> gts_by_class;
    for (const GroundTruth& g : gts) gts_by_class[g.class_id].push_back(g);

    EvalReport report;
    report.thresholds.assign(thresholds.begin(), thresholds.end());
    report.map_per_threshold.assign(thresholds.size(), 0.0);

    for (int cls : gt_classes) {
        const auto& cls_dets = dets_by_class[cls];
        const auto& cls_gts = gts_by_class[cls];
        auto& aps = report.per_class_ap[cls];
        auto& counts = report.counts[cls];
        aps.resize(thresholds.size());
        counts.resize(thresholds.size());
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            const MatchResult match = match_for_ap(cls_dets, cls_gts, thresholds[t]);
            aps[t] = average_precision(match.tp, static_cast<std::int64_t>(cls_gts.size()));
            const auto tp = std::count(match.tp.begin(), match.tp.end(), true);
            counts[t] = {tp, static_cast<std::int64_t>(match.tp.size()) - tp, match.fn};
            report.map_per_threshold[t] += aps[t];
        }
    }
    if (!gt_classes.empty())
        for (double& m : report.map_per_threshold) m /= static_cast<double>(gt_classes.size());

    double sum = 0.0;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        sum += report.map_per_threshold[t];
        if (thresholds[t] == 0.5) report.map50 = report.map_per_threshold[t];
    }
    report.map50_95 = sum / static_cast<double>(thresholds.size());
    return report;
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
    out << "class,threshold,ap\n";
    for (const auto& [cls, aps] : report.per_class_ap)
        for (std::size_t t = 0; t < aps.size(); ++t)
            out << cls << ',' << fmt9(report.thresholds[t]) << ',' << fmt9(aps[t]) << '\n';
    out << "summary,map50," << fmt9(report.map50) << '\n';
    out << "summary,map50_95," << fmt9(report.map50_95) << '\n';
}

}  // namespace detkit
