#pragma once

namespace detkit {

/// One exponential-moving-average blend: returns
///   (1 - decay) * previous + decay * current,
/// computed as current + (1 - decay) * (previous - current). The difference
/// form keeps two guarantees that the textbook form loses to rounding: the
/// result never leaves [min(previous, current), max(previous, current)], and
/// the gap to `current` contracts by exactly one multiplication with
/// (1 - decay).
inline double ema_mix(double previous, double current, double decay) {
    return current + (1.0 - decay) * (previous - current);
}

}  // namespace detkit
