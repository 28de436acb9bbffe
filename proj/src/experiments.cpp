#include "detkit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "detkit/io.hpp"
#include "detkit/rng.hpp"

namespace detkit {

namespace {

// Task geometry constants (arbitrary units; losses are scale-invariant but
// fixed-rate descent is not, so the scale here is matched to the default
// learning rate).
constexpr double kCenterLo = 2.0, kCenterHi = 4.0;
constexpr double kSideLo = 1.0, kSideHi = 2.2;

BBox box_from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

BBox random_gt(std::mt19937_64& rng) {
    const double cx = uniform(rng, kCenterLo, kCenterHi);
    const double cy = uniform(rng, kCenterLo, kCenterHi);
    const double w = uniform(rng, kSideLo, kSideHi);
    const double h = uniform(rng, kSideLo, kSideHi);
    return box_from_center(cx, cy, w, h);
}

BBox make_overlap_init(std::mt19937_64& rng, const BBox& gt) {
    // rejection-sample jittered copies until the IoU lands in [0.1, 0.5]
    for (;;) {
        const double w = gt.width() * uniform(rng, 0.6, 1.6);
        const double h = gt.height() * uniform(rng, 0.6, 1.6);
        const double cx = gt.cx() + uniform(rng, -0.9, 0.9) * gt.width();
        const double cy = gt.cy() + uniform(rng, -0.9, 0.9) * gt.height();
        const BBox cand = box_from_center(cx, cy, w, h);
        const double overlap = iou(cand, gt);
        if (overlap >= 0.1 && overlap <= 0.5) return cand;
    }
}

BBox make_disjoint_init(std::mt19937_64& rng, const BBox& gt) {
    const double w = uniform(rng, kSideLo, kSideHi);
    const double h = uniform(rng, kSideLo, kSideHi);
    const double gap = uniform(rng, 0.1, 0.5);
    const double slide = uniform(rng, -0.5, 0.5);
    BBox init;
    switch (rng() % 4) {
        case 0:  // right of gt
            init = box_from_center(gt.x2 + gap + 0.5 * w, gt.cy() + slide * gt.height(), w, h);
            break;
        case 1:  // left
            init = box_from_center(gt.x1 - gap - 0.5 * w, gt.cy() + slide * gt.height(), w, h);
            break;
        case 2:  // below
            init = box_from_center(gt.cx() + slide * gt.width(), gt.y2 + gap + 0.5 * h, w, h);
            break;
        default:  // above
            init = box_from_center(gt.cx() + slide * gt.width(), gt.y1 - gap - 0.5 * h, w, h);
            break;
    }
    return init;
}

BBox make_aspect_skew_init(std::mt19937_64& rng, const BBox& gt) {
    // same center and area, aspect ratio off by a factor in [2, 4]
    double ratio = uniform(rng, 2.0, 4.0);
    if (coin_flip(rng)) ratio = 1.0 / ratio;
    const double f = std::sqrt(ratio);
    return box_from_center(gt.cx(), gt.cy(), gt.width() * f, gt.height() / f);
}

BBox make_scale_skew_init(std::mt19937_64& rng, const BBox& gt) {
    // same center and aspect, area off by a factor in [4, 9]
    double s = uniform(rng, 2.0, 3.0);
    if (coin_flip(rng)) s = 1.0 / s;
    return box_from_center(gt.cx(), gt.cy(), gt.width() * s, gt.height() * s);
}

constexpr double kRepairEps = 1e-6;

// Clamps inverted corners back to a sliver around their midpoint.
bool repair_box(BBox& b) {
    bool repaired = false;
    if (b.x2 < b.x1 + kRepairEps) {
        const double mid = 0.5 * (b.x1 + b.x2);
        b.x1 = mid - 0.5 * kRepairEps;
        b.x2 = mid + 0.5 * kRepairEps;
        repaired = true;
    }
    if (b.y2 < b.y1 + kRepairEps) {
        const double mid = 0.5 * (b.y1 + b.y2);
        b.y1 = mid - 0.5 * kRepairEps;
        b.y2 = mid + 0.5 * kRepairEps;
        repaired = true;
    }
    return repaired;
}

BBox apply_step(const BBox& b, const Eigen::Vector4d& grad, double rate) {
    return {b.x1 - rate * grad[0], b.y1 - rate * grad[1], b.x2 - rate * grad[2],
            b.y2 - rate * grad[3]};
}

double median_of(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::string_view to_string(TaskRegime r) {
    switch (r) {
        case TaskRegime::Overlap: return "overlap";
        case TaskRegime::Disjoint: return "disjoint";
        case TaskRegime::AspectSkew: return "aspect-skew";
        case TaskRegime::ScaleSkew: return "scale-skew";
    }
    return "?";
}

std::optional<TaskRegime> parse_regime(std::string_view name) {
    if (name == "overlap") return TaskRegime::Overlap;
    if (name == "disjoint") return TaskRegime::Disjoint;
    if (name == "aspect-skew") return TaskRegime::AspectSkew;
    if (name == "scale-skew") return TaskRegime::ScaleSkew;
    return std::nullopt;
}

std::vector<RegressionTask> gen_tasks(int n, std::uint64_t seed, TaskRegime regime) {
    if (n < 1) throw std::invalid_argument("gen_tasks: need n >= 1");
    std::mt19937_64 rng(seed);
    std::vector<RegressionTask> tasks;
    tasks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        RegressionTask task;
        task.seed = rng();
        task.gt = random_gt(rng);
        switch (regime) {
            case TaskRegime::Overlap: task.init = make_overlap_init(rng, task.gt); break;
            case TaskRegime::Disjoint: task.init = make_disjoint_init(rng, task.gt); break;
            case TaskRegime::AspectSkew: task.init = make_aspect_skew_init(rng, task.gt); break;
            case TaskRegime::ScaleSkew: task.init = make_scale_skew_init(rng, task.gt); break;
        }
        tasks.push_back(task);
    }
    return tasks;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (!(success_iou > 0 && success_iou < 1))
        throw std::invalid_argument("success_iou must lie in (0, 1)");
}

TrainRecord train_box(const RegressionTask& task, const TrainConfig& config) {
    config.validate();
    require_valid(task.gt, "gt");
    require_valid(task.init, "init");

    TrainRecord rec;
    BBox box = task.init;
    LossReport rep = loss(config.variant, box, task.gt);
    rec.history.push_back({0, rep.value, rep.iou});
    if (rep.iou >= config.success_iou) {
        rec.steps_to_success = 0;
        rec.final_iou = rep.iou;
        return rec;
    }

    for (int step = 1; step <= config.steps; ++step) {
        if (!rep.grad.allFinite()) {
            rec.aborted = true;
            rec.abort_reason = "non-finite gradient at step " + std::to_string(step - 1);
            break;
        }

        BBox next;
        LossReport next_rep;
        if (config.backtracking) {
            double rate = config.learning_rate;
            bool moved = false;
            for (int halving = 0; halving < 60; ++halving) {
                BBox cand = apply_step(box, rep.grad, rate);
                const bool repaired = repair_box(cand);
                const LossReport cand_rep = loss(config.variant, cand, task.gt);
                if (cand_rep.value <= rep.value) {
                    if (repaired) ++rec.repairs;
                    next = cand;
                    next_rep = cand_rep;
                    moved = true;
                    break;
                }
                rate *= 0.5;
            }
            if (!moved) {  // no descent direction left; hold position
                next = box;
                next_rep = rep;
            }
        } else {
            next = apply_step(box, rep.grad, config.learning_rate);
            if (repair_box(next)) ++rec.repairs;
            next_rep = loss(config.variant, next, task.gt);
        }

        box = next;
        rep = next_rep;
        rec.history.push_back({step, rep.value, rep.iou});
        if (rep.iou >= config.success_iou) {
            rec.steps_to_success = step;
            break;
        }
    }
    rec.final_iou = rec.history.back().iou;
    return rec;
}

std::vector<RunRecord> run_variant(std::span<const RegressionTask> tasks,
                                   const TrainConfig& config) {
    if (tasks.empty()) throw std::invalid_argument("run_variant: need at least one task");
    std::vector<RunRecord> runs;
    runs.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i)
        runs.push_back({config.variant, static_cast<int>(i), train_box(tasks[i], config)});
    return runs;
}

VariantSummary summarize_runs(std::span<const RunRecord> runs) {
    if (runs.empty()) throw std::invalid_argument("summarize_runs: no runs");
    VariantSummary summary;
    summary.variant = runs.front().variant;
    summary.tasks = static_cast<int>(runs.size());
    summary.min_final_iou = std::numeric_limits<double>::infinity();
    summary.max_final_iou = -std::numeric_limits<double>::infinity();
    std::vector<double> success_steps;
    double iou_sum = 0.0;
    for (const RunRecord& run : runs) {
        const TrainRecord& r = run.record;
        if (r.steps_to_success) {
            ++summary.successes;
            success_steps.push_back(static_cast<double>(*r.steps_to_success));
        }
        iou_sum += r.final_iou;
        summary.min_final_iou = std::min(summary.min_final_iou, r.final_iou);
        summary.max_final_iou = std::max(summary.max_final_iou, r.final_iou);
    }
    summary.success_rate = static_cast<double>(summary.successes) / summary.tasks;
    summary.median_steps = median_of(std::move(success_steps));
    summary.mean_final_iou = iou_sum / summary.tasks;
    return summary;
}

ComparisonReport compare_convergence(std::span<const RegressionTask> tasks,
                                     std::span<const LossVariant> variants,
                                     const TrainConfig& config) {
    if (tasks.empty()) throw std::invalid_argument("compare_convergence: need at least one task");
    if (variants.size() < 2)
        throw std::invalid_argument("compare_convergence: need at least two variants");

    ComparisonReport report;
    for (const LossVariant variant : variants) {
        TrainConfig cfg = config;
        cfg.variant = variant;
        std::vector<RunRecord> runs = run_variant(tasks, cfg);
        report.summaries.push_back(summarize_runs(runs));
        for (RunRecord& run : runs) report.runs.push_back(std::move(run));
    }
    return report;
}

void curve_emit(std::span<const RunRecord> runs, std::ostream& out) {
    if (runs.empty()) throw std::invalid_argument("curve_emit: no records");
    out << "variant,task,step,loss,iou\n";
    for (const RunRecord& run : runs)
        for (const StepStat& s : run.record.history)
            out << to_string(run.variant) << ',' << run.task_index << ',' << s.step << ','
                << fmt9(s.loss) << ',' << fmt9(s.iou) << '\n';
}

void write_summary_csv(std::span<const VariantSummary> summaries, TaskRegime regime,
                       std::ostream& out) {
    out << "variant,regime,tasks,successes,success_rate,median_steps_to_success,"
           "mean_final_iou,min_final_iou,max_final_iou\n";
    for (const VariantSummary& s : summaries)
        out << to_string(s.variant) << ',' << to_string(regime) << ',' << s.tasks << ','
            << s.successes << ',' << fmt9(s.success_rate) << ',' << fmt9(s.median_steps) << ','
            << fmt9(s.mean_final_iou) << ',' << fmt9(s.min_final_iou) << ','
            << fmt9(s.max_final_iou) << '\n';
}

}  // namespace detkit
