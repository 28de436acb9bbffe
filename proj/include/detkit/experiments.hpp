#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detkit/box.hpp"

namespace detkit {

/// Initial-condition families for the synthetic box-regression tasks.
enum class TaskRegime { Overlap, Disjoint, AspectSkew, ScaleSkew };

std::string_view to_string(TaskRegime r);
std::optional<TaskRegime> parse_regime(std::string_view name);

struct RegressionTask {
    BBox gt;
    BBox init;
    std::uint64_t seed = 0;  // per-task sub-seed, recorded for reproducibility
};

/// Deterministic task generation. Regimes constrain the initial condition:
/// overlap starts at IoU in [0.1, 0.5]; disjoint at IoU 0; aspect-skew at
/// equal centers with aspect ratios at least 2x apart; scale-skew at equal
/// centers and aspect with areas at least 4x apart.
std::vector<RegressionTask> gen_tasks(int n, std::uint64_t seed, TaskRegime regime);

struct TrainConfig {
    LossVariant variant = LossVariant::AIOU;
    double learning_rate = 0.01;
    int steps = 2000;
    std::uint64_t seed = 0;
    double success_iou = 0.9;
    bool backtracking = false;  // halve the step until the loss does not increase

    void validate() const;
};

struct StepStat {
    int step = 0;
    double loss = 0;
    double iou = 0;
};

struct TrainRecord {
    std::vector<StepStat> history;       // step 0 is the initial state
    std::optional<int> steps_to_success;
    double final_iou = 0;
    int repairs = 0;  // degenerate intermediate boxes clamped back to validity
    bool aborted = false;
    std::string abort_reason;
};

/// Plain gradient descent on the predicted corners, using the configured
/// loss's analytic gradient. Stops early once IoU reaches success_iou.
TrainRecord train_box(const RegressionTask& task, const TrainConfig& config);

struct RunRecord {
    LossVariant variant;
    int task_index = 0;
    TrainRecord record;
};

struct VariantSummary {
    LossVariant variant;
    int tasks = 0;
    int successes = 0;
    double success_rate = 0;
    double median_steps = 0;  // over successful tasks; NaN when none succeed
    double mean_final_iou = 0;
    double min_final_iou = 0;
    double max_final_iou = 0;
};

struct ComparisonReport {
    std::vector<RunRecord> runs;
    std::vector<VariantSummary> summaries;
};

/// Runs every task under config.variant, in task order.
std::vector<RunRecord> run_variant(std::span<const RegressionTask> tasks,
                                   const TrainConfig& config);

/// Aggregates one variant's runs; `runs` must be nonempty and homogeneous.
VariantSummary summarize_runs(std::span<const RunRecord> runs);

/// Runs every task under every variant and summarizes per variant.
ComparisonReport compare_convergence(std::span<const RegressionTask> tasks,
                                     std::span<const LossVariant> variants,
                                     const TrainConfig& config);

/// Long-format CSV: variant,task,step,loss,iou.
void curve_emit(std::span<const RunRecord> runs, std::ostream& out);

/// Per-variant summary CSV; `regime` is echoed into a column.
void write_summary_csv(std::span<const VariantSummary> summaries, TaskRegime regime,
                       std::ostream& out);

}  // namespace detkit
