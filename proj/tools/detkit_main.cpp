// detkit command line: box-loss reports, gradient checks, mAP evaluation,
// detection-stream smoothing, attention demos and convergence experiments.
//
// Exit codes: 0 success, 1 check failure, 2 usage or input error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "detkit/attention.hpp"
#include "detkit/box.hpp"
#include "detkit/evaluation.hpp"
#include "detkit/experiments.hpp"
#include "detkit/io.hpp"
#include "detkit/rng.hpp"
#include "detkit/smoothing.hpp"
#include "detkit/tensor.hpp"

namespace {

using namespace detkit;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

std::vector<double> parse_number_list(const std::string& text, std::size_t expected,
                                      const std::string& what) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(what + ": bad number '" + item + "'");
    }
    if (values.size() != expected)
        throw std::invalid_argument(what + ": expected " + std::to_string(expected) +
                                    " comma-separated values");
    return values;
}

BBox parse_box(const std::string& text, const char* what) {
    const auto v = parse_number_list(text, 4, what);
    BBox box{v[0], v[1], v[2], v[3]};
    require_valid(box, what);
    return box;
}

LossVariant variant_or_throw(const std::string& name) {
    const auto v = parse_variant(name);
    if (!v) throw std::invalid_argument("unknown loss variant '" + name + "'");
    return *v;
}

// "0.5" or "start:stop:step", endpoints inclusive
std::vector<double> parse_thresholds(const std::string& text) {
    std::vector<double> out;
    const auto c1 = text.find(':');
    if (c1 == std::string::npos) {
        out.push_back(std::stod(text));
        return out;
    }
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw std::invalid_argument("thresholds must be a number or start:stop:step");
    const double start = std::stod(text.substr(0, c1));
    const double stop = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (step <= 0) throw std::invalid_argument("threshold step must be positive");
    for (int i = 0;; ++i) {
        const double t = start + i * step;
        if (t > stop + 1e-9) break;
        out.push_back(t);
    }
    if (out.empty()) throw std::invalid_argument("threshold range is empty");
    return out;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    return out;
}

// ---- loss ----------------------------------------------------------------

int cmd_loss(const std::string& variant_name, const std::string& pred_text,
             const std::string& gt_text, bool as_json) {
    const LossVariant variant = variant_or_throw(variant_name);
    const BBox pred = parse_box(pred_text, "pred");
    const BBox gt = parse_box(gt_text, "gt");
    const LossReport rep = loss(variant, pred, gt);

    if (as_json) {
        nlohmann::json j;
        j["variant"] = std::string(to_string(variant));
        j["value"] = rep.value;
        j["iou"] = rep.iou;
        j["terms"] = {{"overlap", rep.terms.overlap}, {"center", rep.terms.center},
                      {"aspect", rep.terms.aspect},   {"width", rep.terms.width},
                      {"height", rep.terms.height}};
        j["grad"] = {rep.grad[0], rep.grad[1], rep.grad[2], rep.grad[3]};
        j["v"] = rep.v;
        j["alpha"] = rep.alpha;
        std::cout << j.dump() << '\n';
        return kExitOk;
    }

    std::cout << "variant: " << to_string(variant) << '\n'
              << "value: " << fmt9(rep.value) << '\n'
              << "iou: " << fmt9(rep.iou) << '\n'
              << "terms: overlap=" << fmt9(rep.terms.overlap) << " center=" << fmt9(rep.terms.center)
              << " aspect=" << fmt9(rep.terms.aspect) << " width=" << fmt9(rep.terms.width)
              << " height=" << fmt9(rep.terms.height) << '\n'
              << "grad: [" << fmt9(rep.grad[0]) << ", " << fmt9(rep.grad[1]) << ", "
              << fmt9(rep.grad[2]) << ", " << fmt9(rep.grad[3]) << "]\n";
    return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

struct GradCheckResult {
    int checked = 0;
    int skipped = 0;
    double max_rel_err = 0;
};

BBox random_unit_box(std::mt19937_64& rng) {
    const double cx = uniform(rng, 0.3, 0.7);
    const double cy = uniform(rng, 0.3, 0.7);
    const double w = uniform(rng, 0.2, 0.6);
    const double h = uniform(rng, 0.2, 0.6);
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

// jittered copy of gt guaranteeing some overlap after resampling
BBox random_overlapping_pred(std::mt19937_64& rng, const BBox& gt) {
    for (;;) {
        const double w = gt.width() * uniform(rng, 0.5, 1.8);
        const double h = gt.height() * uniform(rng, 0.5, 1.8);
        const double cx = gt.cx() + uniform(rng, -0.8, 0.8) * gt.width();
        const double cy = gt.cy() + uniform(rng, -0.8, 0.8) * gt.height();
        const BBox pred{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
        if (iou(pred, gt) > 0.0) return pred;
    }
}

GradCheckResult run_gradcheck(LossVariant variant, int samples, std::uint64_t seed) {
    constexpr double kFdStep = 1e-6;
    constexpr double kKinkMargin = 4.0 * kFdStep;

    std::mt19937_64 rng(seed);
    GradCheckResult result;
    while (result.checked + result.skipped < samples) {
        const BBox gt = random_unit_box(rng);
        const BBox pred = random_overlapping_pred(rng, gt);
        if (near_kink(pred, gt, kKinkMargin)) {
            ++result.skipped;
            continue;
        }
        const LossReport rep = loss(variant, pred, gt);

        double coords[4] = {pred.x1, pred.y1, pred.x2, pred.y2};
        for (int i = 0; i < 4; ++i) {
            const double saved = coords[i];
            coords[i] = saved + kFdStep;
            const BBox hi{coords[0], coords[1], coords[2], coords[3]};
            coords[i] = saved - kFdStep;
            const BBox lo{coords[0], coords[1], coords[2], coords[3]};
            coords[i] = saved;
            const double numeric = (loss_value_frozen_alpha(variant, hi, gt, rep.alpha) -
                                    loss_value_frozen_alpha(variant, lo, gt, rep.alpha)) /
                                   (2.0 * kFdStep);
            const double analytic = rep.grad[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            result.max_rel_err = std::max(result.max_rel_err, rel);
        }
        ++result.checked;
    }
    return result;
}

int cmd_gradcheck(const std::string& variant_name, int samples, std::uint64_t seed, double tol) {
    const LossVariant variant = variant_or_throw(variant_name);
    const GradCheckResult r = run_gradcheck(variant, samples, seed);
    const bool pass = r.max_rel_err < tol;
    std::cout << "variant: " << to_string(variant) << '\n'
              << "samples: " << samples << '\n'
              << "checked: " << r.checked << '\n'
              << "skipped_kink_adjacent: " << r.skipped << '\n'
              << "max_rel_err: " << fmt9(r.max_rel_err) << '\n'
              << "tolerance: " << fmt9(tol) << '\n'
              << "result: " << (pass ? "PASS" : "FAIL") << '\n';
    return pass ? kExitOk : kExitCheckFailed;
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(const std::string& gt_path, const std::string& pred_path,
             const std::string& thresholds_text, const std::string& out_path) {
    const auto thresholds = parse_thresholds(thresholds_text);
    const auto gts = read_ground_truths(gt_path);
    auto preds = read_predictions(pred_path);
    const EvalReport report = evaluate(std::move(preds), gts, thresholds, &std::cerr);
    if (out_path.empty()) {
        write_report_csv(report, std::cout);
    } else {
        auto out = open_output(out_path);
        write_report_csv(report, out);
    }
    return kExitOk;
}

// ---- smooth ----------------------------------------------------------------

int cmd_smooth(const std::string& input_path, double decay, double gate, int max_age,
               const std::string& out_path) {
    const SmoothConfig cfg{decay, gate, max_age};
    cfg.validate();
    const StreamRecords stream = read_stream(input_path);

    // group contiguous runs of one frame_id; smooth_stream enforces ordering
    std::vector<std::vector<Detection>> frames;
    std::vector<std::vector<const FileRecord*>> sources;
    for (std::size_t i = 0; i < stream.detections.size(); ++i) {
        const Detection& det = stream.detections[i];
        if (frames.empty() || frames.back().front().frame_id != det.frame_id) {
            frames.emplace_back();
            sources.emplace_back();
        }
        frames.back().push_back(det);
        sources.back().push_back(&stream.records[i]);
    }

    const auto smoothed = smooth_stream(frames, cfg);

    std::vector<FileRecord> out_records;
    for (std::size_t f = 0; f < smoothed.size(); ++f) {
        for (std::size_t d = 0; d < smoothed[f].size(); ++d) {
            FileRecord rec = *sources[f][d];  // pass through image_id etc.
            rec.bbox = smoothed[f][d].bbox;
            rec.score = smoothed[f][d].score;
            rec.track_id = smoothed[f][d].track_id;
            out_records.push_back(std::move(rec));
        }
    }
    write_jsonl(out_path, out_records);
    return kExitOk;
}

// ---- train / compare ---------------------------------------------------------

TrainConfig build_train_config(double lr, int steps, std::uint64_t seed, bool backtracking) {
    TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.steps = steps;
    cfg.seed = seed;
    cfg.backtracking = backtracking;
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& loss_name, const std::string& regime_name, int tasks, int steps,
              double lr, std::uint64_t seed, bool backtracking, const std::string& out_dir) {
    const auto regime = parse_regime(regime_name);
    if (!regime) throw std::invalid_argument("unknown regime '" + regime_name + "'");
    TrainConfig cfg = build_train_config(lr, steps, seed, backtracking);
    cfg.variant = variant_or_throw(loss_name);

    const auto task_list = gen_tasks(tasks, seed, *regime);
    const auto runs = run_variant(task_list, cfg);
    const VariantSummary summary = summarize_runs(runs);

    std::filesystem::create_directories(out_dir);
    auto curves = open_output(out_dir + "/curves.csv");
    curve_emit(runs, curves);
    auto summary_out = open_output(out_dir + "/summary.csv");
    write_summary_csv({&summary, 1}, *regime, summary_out);

    std::cout << "variant=" << to_string(cfg.variant) << " regime=" << to_string(*regime)
              << " tasks=" << summary.tasks << " success_rate=" << fmt9(summary.success_rate)
              << " median_steps=" << fmt9(summary.median_steps) << '\n';
    return kExitOk;
}

int cmd_compare(const std::string& losses_text, const std::string& regime_name, int tasks,
                int steps, double lr, std::uint64_t seed, bool backtracking,
                const std::string& out_dir) {
    const auto regime = parse_regime(regime_name);
    if (!regime) throw std::invalid_argument("unknown regime '" + regime_name + "'");

    std::vector<LossVariant> variants;
    std::stringstream ss(losses_text);
    std::string item;
    while (std::getline(ss, item, ',')) variants.push_back(variant_or_throw(item));
    if (variants.size() < 2) throw std::invalid_argument("compare needs at least two losses");

    const TrainConfig cfg = build_train_config(lr, steps, seed, backtracking);
    const auto task_list = gen_tasks(tasks, seed, *regime);
    const ComparisonReport report = compare_convergence(task_list, variants, cfg);

    std::filesystem::create_directories(out_dir);
    auto curves = open_output(out_dir + "/curves.csv");
    curve_emit(report.runs, curves);
    auto summary_out = open_output(out_dir + "/summary.csv");
    write_summary_csv(report.summaries, *regime, summary_out);

    for (const VariantSummary& s : report.summaries)
        std::cout << "variant=" << to_string(s.variant) << " success_rate=" << fmt9(s.success_rate)
                  << " median_steps=" << fmt9(s.median_steps) << '\n';
    return kExitOk;
}

// ---- attn ------------------------------------------------------------------

int cmd_attn(const std::string& shape_text, std::uint64_t seed, bool stats) {
    const auto dims = parse_number_list(shape_text, 3, "shape");
    const auto C = static_cast<Eigen::Index>(dims[0]);
    const auto H = static_cast<Eigen::Index>(dims[1]);
    const auto W = static_cast<Eigen::Index>(dims[2]);
    if (C < 1 || H < 1 || W < 1) throw std::invalid_argument("shape dims must be positive");

    const GomParams params = GomParams::seeded(C, 4, 7, seed);
    std::mt19937_64 rng(seed + 1);
    Tensor f1 = Tensor::zeros({C, H, W});
    for (Eigen::Index i = 0; i < f1.size(); ++i) f1.data[i] = uniform(rng, -1.0, 1.0);

    const Tensor f3 = gom_forward(f1, params);

    const bool shape_ok = f3.same_shape(f1);
    const bool bound_ok = (f3.data.abs() <= f1.data.abs()).all();
    std::cout << "shape: " << C << ',' << H << ',' << W << '\n'
              << "output_shape: " << f3.shape[0] << ',' << f3.shape[1] << ',' << f3.shape[2] << '\n'
              << "input: min=" << fmt9(f1.data.minCoeff()) << " max=" << fmt9(f1.data.maxCoeff())
              << " mean=" << fmt9(f1.data.mean()) << '\n'
              << "output: min=" << fmt9(f3.data.minCoeff()) << " max=" << fmt9(f3.data.maxCoeff())
              << " mean=" << fmt9(f3.data.mean()) << '\n';
    if (stats) {
        const Eigen::Index sites = H * W;
        for (Eigen::Index c = 0; c < C; ++c)
            std::cout << "channel " << c << ": mean_in=" << fmt9(f1.data.segment(c * sites, sites).mean())
                      << " mean_out=" << fmt9(f3.data.segment(c * sites, sites).mean()) << '\n';
    }
    std::cout << "checks: shape_preserved=" << (shape_ok ? "yes" : "no")
              << " bound_holds=" << (bound_ok ? "yes" : "no") << '\n';
    return (shape_ok && bound_ok) ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"detection-mathematics toolkit: IoU-family losses with analytic gradients, "
                 "global/EMA attention forward passes, detection smoothing, mAP evaluation "
                 "and convergence experiments"};
    app.require_subcommand(1);

    // loss
    auto* loss_cmd = app.add_subcommand("loss", "evaluate one loss on a box pair");
    std::string variant_name = "aiou", pred_text, gt_text;
    bool as_json = false;
    loss_cmd->add_option("--variant", variant_name, "iou|ciou|eiou|aiou")->capture_default_str();
    loss_cmd->add_option("--pred", pred_text, "predicted box x1,y1,x2,y2")->required();
    loss_cmd->add_option("--gt", gt_text, "ground-truth box x1,y1,x2,y2")->required();
    loss_cmd->add_flag("--json", as_json, "emit a JSON object instead of text");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "compare analytic gradients to central differences");
    std::string gc_variant = "aiou";
    int gc_samples = 1000;
    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-4;
    grad_cmd->add_option("--variant", gc_variant, "iou|ciou|eiou|aiou")->capture_default_str();
    grad_cmd->add_option("--samples", gc_samples, "number of random pairs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    grad_cmd->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();
    grad_cmd->add_option("--tol", gc_tol, "max relative error allowed")->capture_default_str();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "mAP evaluation of predictions against ground truth");
    std::string eval_gt, eval_pred, eval_thresholds = "0.5:0.95:0.05", eval_out;
    eval_cmd->add_option("--gt", eval_gt, "ground-truth JSONL file")->required();
    eval_cmd->add_option("--pred", eval_pred, "predictions JSONL file")->required();
    eval_cmd->add_option("--thresholds", eval_thresholds, "IoU threshold or start:stop:step")
        ->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "write the CSV report here instead of stdout");

    // smooth
    auto* smooth_cmd = app.add_subcommand("smooth", "EMA-smooth a detection stream");
    std::string smooth_in, smooth_out;
    double smooth_decay = 0.3, smooth_gate = 0.3;
    int smooth_max_age = 5;
    smooth_cmd->add_option("--input", smooth_in, "stream JSONL ordered by frame_id")->required();
    smooth_cmd->add_option("--decay", smooth_decay, "EMA decay in (0,1]")->capture_default_str();
    smooth_cmd->add_option("--gate", smooth_gate, "association IoU gate in (0,1)")->capture_default_str();
    smooth_cmd->add_option("--max-age", smooth_max_age, "frames a track survives unmatched")
        ->capture_default_str();
    smooth_cmd->add_option("--out", smooth_out, "output JSONL path")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "gradient-descent box regression on synthetic tasks");
    std::string train_loss = "aiou", train_regime = "overlap", train_out = "train_out";
    int train_tasks = 10, train_steps = 2000;
    double train_lr = 0.01;
    std::uint64_t train_seed = 1;
    bool train_backtracking = false;
    train_cmd->add_option("--loss", train_loss, "iou|ciou|eiou|aiou")->capture_default_str();
    train_cmd->add_option("--regime", train_regime, "overlap|disjoint|aspect-skew|scale-skew")
        ->capture_default_str();
    train_cmd->add_option("--tasks", train_tasks, "task count")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--steps", train_steps, "max descent steps")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--lr", train_lr, "learning rate")->capture_default_str();
    train_cmd->add_option("--seed", train_seed, "task-generation seed")->capture_default_str();
    train_cmd->add_flag("--backtracking", train_backtracking, "halve steps until the loss is non-increasing");
    train_cmd->add_option("--out", train_out, "output directory for curves.csv and summary.csv")
        ->capture_default_str();

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "convergence comparison across loss variants");
    std::string cmp_losses = "iou,ciou,eiou,aiou", cmp_regime = "overlap", cmp_out = "compare_out";
    int cmp_tasks = 20, cmp_steps = 2000;
    double cmp_lr = 0.01;
    std::uint64_t cmp_seed = 1;
    bool cmp_backtracking = false;
    cmp_cmd->add_option("--losses", cmp_losses, "comma-separated variant list")->capture_default_str();
    cmp_cmd->add_option("--regime", cmp_regime, "overlap|disjoint|aspect-skew|scale-skew")
        ->capture_default_str();
    cmp_cmd->add_option("--tasks", cmp_tasks, "task count")->check(CLI::PositiveNumber)->capture_default_str();
    cmp_cmd->add_option("--steps", cmp_steps, "max descent steps")->check(CLI::PositiveNumber)->capture_default_str();
    cmp_cmd->add_option("--lr", cmp_lr, "learning rate")->capture_default_str();
    cmp_cmd->add_option("--seed", cmp_seed, "task-generation seed")->capture_default_str();
    cmp_cmd->add_flag("--backtracking", cmp_backtracking, "halve steps until the loss is non-increasing");
    cmp_cmd->add_option("--out", cmp_out, "output directory")->capture_default_str();

    // attn
    auto* attn_cmd = app.add_subcommand("attn", "run the global-attention forward pass on a random tensor");
    std::string attn_shape = "4,8,8";
    std::uint64_t attn_seed = 1;
    bool attn_stats = false;
    attn_cmd->add_option("--shape", attn_shape, "C,H,W")->capture_default_str();
    attn_cmd->add_option("--seed", attn_seed, "RNG seed")->capture_default_str();
    attn_cmd->add_flag("--stats", attn_stats, "per-channel statistics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return kExitUsage;
    }

    try {
        if (loss_cmd->parsed()) return cmd_loss(variant_name, pred_text, gt_text, as_json);
        if (grad_cmd->parsed()) return cmd_gradcheck(gc_variant, gc_samples, gc_seed, gc_tol);
        if (eval_cmd->parsed()) return cmd_eval(eval_gt, eval_pred, eval_thresholds, eval_out);
        if (smooth_cmd->parsed())
            return cmd_smooth(smooth_in, smooth_decay, smooth_gate, smooth_max_age, smooth_out);
        if (train_cmd->parsed())
            return cmd_train(train_loss, train_regime, train_tasks, train_steps, train_lr,
                             train_seed, train_backtracking, train_out);
        if (cmp_cmd->parsed())
            return cmd_compare(cmp_losses, cmp_regime, cmp_tasks, cmp_steps, cmp_lr, cmp_seed,
                               cmp_backtracking, cmp_out);
        if (attn_cmd->parsed()) return cmd_attn(attn_shape, attn_seed, attn_stats);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
