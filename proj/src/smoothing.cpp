#include "detkit/smoothing.hpp"

#include <algorithm>
#include <stdexcept>

#include "detkit/ema.hpp"

namespace detkit {

void SmoothConfig::validate() const {
    if (!(decay > 0.0 && decay <= 1.0))
        throw std::invalid_argument("decay must lie in (0, 1]");
    if (!(iou_gate > 0.0 && iou_gate < 1.0))
        throw std::invalid_argument("iou gate must lie in (0, 1)");
    if (max_age < 0) throw std::invalid_argument("max_age must be nonnegative");
}

Association associate(std::span<const Track> tracks, std::span<const Detection> detections,
                      double iou_gate) {
    if (!(iou_gate > 0.0 && iou_gate < 1.0))
        throw std::invalid_argument("iou gate must lie in (0, 1)");
    for (const Detection& d : detections)
        if (d.frame_id != detections.front().frame_id)
            throw std::invalid_argument("associate: detections span multiple frame ids");

    struct Candidate {
        double iou;
        std::size_t track, det;
    };
    std::vector<Candidate> candidates;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        for (std::size_t d = 0; d < detections.size(); ++d) {
            if (tracks[t].class_id != detections[d].class_id) continue;
            const double overlap = iou(tracks[t].smoothed_bbox, detections[d].bbox);
            if (overlap >= iou_gate) candidates.push_back({overlap, t, d});
        }
    }
    // descending IoU, index tie-break for determinism
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.track != b.track) return a.track < b.track;
        return a.det < b.det;
    });

    Association out;
    std::vector<bool> track_used(tracks.size(), false), det_used(detections.size(), false);
    for (const Candidate& c : candidates) {
        if (track_used[c.track] || det_used[c.det]) continue;
        track_used[c.track] = det_used[c.det] = true;
        out.pairs.emplace_back(c.track, c.det);
    }
    for (std::size_t t = 0; t < tracks.size(); ++t)
        if (!track_used[t]) out.unmatched_tracks.push_back(t);
    for (std::size_t d = 0; d < detections.size(); ++d)
        if (!det_used[d]) out.unmatched_detections.push_back(d);
    return out;
}

std::vector<TrackedDetection> smooth_step(TrackerState& state,
                                          std::span<const Detection> detections,
                                          const SmoothConfig& cfg) {
    cfg.validate();
    const Association assoc = associate(state.tracks, detections, cfg.iou_gate);

    std::vector<TrackedDetection> out(detections.size());

    for (const auto& [t, d] : assoc.pairs) {
        Track& track = state.tracks[t];
        const Detection& det = detections[d];
        track.smoothed_bbox.x1 = ema_mix(track.smoothed_bbox.x1, det.bbox.x1, cfg.decay);
        track.smoothed_bbox.y1 = ema_mix(track.smoothed_bbox.y1, det.bbox.y1, cfg.decay);
        track.smoothed_bbox.x2 = ema_mix(track.smoothed_bbox.x2, det.bbox.x2, cfg.decay);
        track.smoothed_bbox.y2 = ema_mix(track.smoothed_bbox.y2, det.bbox.y2, cfg.decay);
        track.smoothed_score = ema_mix(track.smoothed_score, det.score, cfg.decay);
        track.last_frame = det.frame_id;
        track.age = 0;
        out[d] = {det.frame_id, det.class_id, track.smoothed_bbox, track.smoothed_score,
                  track.track_id};
    }

    for (std::size_t d : assoc.unmatched_detections) {
        const Detection& det = detections[d];
        Track track{state.next_track_id++, det.class_id, det.bbox, det.score, det.frame_id, 0};
        state.tracks.push_back(track);
        out[d] = {det.frame_id, det.class_id, det.bbox, det.score, track.track_id};
    }

    for (std::size_t t : assoc.unmatched_tracks) state.tracks[t].age += 1;
    std::erase_if(state.tracks,
                  [&cfg](const Track& t) { return t.age > cfg.max_age; });
    return out;
}

std::vector<std::vector<TrackedDetection>> smooth_stream(
    std::span<const std::vector<Detection>> frames, const SmoothConfig& cfg) {
    cfg.validate();
    TrackerState state;
    std::vector<std::vector<TrackedDetection>> out;
    out.reserve(frames.size());
    bool have_prev = false;
    std::int64_t prev_frame = 0;
    for (const auto& frame : frames) {
        if (!frame.empty()) {
            const std::int64_t id = frame.front().frame_id;
            if (have_prev && id <= prev_frame)
                throw std::invalid_argument("smooth_stream: frames out of order (frame " +
                                            std::to_string(id) + " after " +
                                            std::to_string(prev_frame) + ")");
            prev_frame = id;
            have_prev = true;
        }
        out.push_back(smooth_step(state, frame, cfg));
    }
    return out;
}

}  // namespace detkit
