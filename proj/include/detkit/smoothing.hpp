#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "detkit/box.hpp"

namespace detkit {

struct Detection {
    std::int64_t frame_id = 0;
    int class_id = 0;
    BBox bbox;
    double score = 0;  // in [0, 1]
};

/// Per-object carrier of the smoothed box and score.
struct Track {
    std::int64_t track_id = 0;
    int class_id = 0;
    BBox smoothed_bbox;
    double smoothed_score = 0;
    std::int64_t last_frame = 0;
    int age = 0;  // frames since last match
};

struct SmoothConfig {
    double decay = 0.3;     // EMA decay in (0, 1]
    double iou_gate = 0.3;  // minimum IoU for a track/detection match, in (0, 1)
    int max_age = 5;        // unmatched frames tolerated before a track is dropped

    void validate() const;
};

struct Association {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (track index, detection index)
    std::vector<std::size_t> unmatched_tracks;
    std::vector<std::size_t> unmatched_detections;
};

/// Greedy matching on descending IoU, same class only, each side used once,
/// pairs below the gate rejected. Detections must all carry one frame id.
Association associate(std::span<const Track> tracks, std::span<const Detection> detections,
                      double iou_gate);

struct TrackedDetection {
    std::int64_t frame_id = 0;
    int class_id = 0;
    BBox bbox;
    double score = 0;
    std::int64_t track_id = 0;
};

/// Mutable per-stream state; streams are independent.
struct TrackerState {
    std::vector<Track> tracks;
    std::int64_t next_track_id = 1;
};

/// Advances the tracker by one frame: matched tracks EMA-blend each box
/// corner and the score toward the detection, unmatched detections spawn
/// tracks at their own values, unmatched tracks age out past max_age.
/// Returns one smoothed record per input detection, in input order.
std::vector<TrackedDetection> smooth_step(TrackerState& state,
                                          std::span<const Detection> detections,
                                          const SmoothConfig& cfg);

/// Folds smooth_step over an ordered frame sequence. Frames must arrive in
/// strictly increasing frame_id order.
std::vector<std::vector<TrackedDetection>> smooth_stream(
    std::span<const std::vector<Detection>> frames, const SmoothConfig& cfg);

}  // namespace detkit
