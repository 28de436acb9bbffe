#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "detkit/tensor.hpp"

namespace detkit {

/// Parameters of the global attention block: a two-layer channel MLP
/// (C -> C/r -> C) and two spatial-fusion convolutions (C -> C/r -> C,
/// k x k, same padding, no pooling anywhere).
struct GomParams {
    Eigen::Index channels = 0;         // C
    Eigen::Index reduction_ratio = 4;  // r, must divide C
    Eigen::Index kernel_size = 7;      // k, odd

    Eigen::MatrixXd mlp_w1;  // (C/r) x C
    Eigen::VectorXd mlp_b1;  // C/r
    Eigen::MatrixXd mlp_w2;  // C x (C/r)
    Eigen::VectorXd mlp_b2;  // C

    Tensor conv1_kernels;  // (C/r) x C x k x k
    Tensor conv2_kernels;  // C x (C/r) x k x k

    /// All weights drawn uniform(-0.1, 0.1) from the given seed.
    static GomParams seeded(Eigen::Index channels, Eigen::Index reduction_ratio,
                            Eigen::Index kernel_size, std::uint64_t seed);

    void validate() const;  // throws std::invalid_argument on inconsistency
};

/// Test hook: when set, gom_forward uses these maps instead of computing
/// channel/spatial attention. Not used by any production path.
struct AttentionOverride {
    std::optional<Tensor> channel_map;
    std::optional<Tensor> spatial_map;
};

/// Channel attention map M_c(F1) in (0,1), same shape as the input.
/// Permutes C x H x W to W x H x C, runs the MLP along the channel axis at
/// every spatial site, permutes back and squashes with sigmoid.
Tensor channel_attention(const Tensor& f1, const GomParams& p);

/// Spatial attention map M_s(F2) in (0,1): conv -> ReLU -> conv -> sigmoid,
/// same padding, no pooling.
Tensor spatial_attention(const Tensor& f2, const GomParams& p);

/// F2 = M_c(F1) * F1, F3 = M_s(F2) * F2 (elementwise); returns F3.
/// |F3| <= |F1| elementwise since both maps lie in (0,1).
Tensor gom_forward(const Tensor& f1, const GomParams& p, const AttentionOverride& forced = {});

/// Score vector evolving by exponential moving average; `decay` in (0, 1]
/// controls how much of the historical scores is retained.
struct EmaAttentionState {
    Eigen::VectorXd scores;
    double decay = 0.3;
    std::int64_t step = 0;

    void validate() const;
};

/// s(t) = (1 - decay) * s(t-1) + decay * s'(t), step incremented.
/// States are values: the input is untouched.
EmaAttentionState ema_update(const EmaAttentionState& state, const Eigen::VectorXd& new_scores);

/// Softmax weights over the current scores; nonnegative, sum to 1.
Eigen::VectorXd attention_weights(const EmaAttentionState& state);

/// Updates the state with `new_scores`, then blends the feature tensors by
/// the resulting attention weights. Output lies in the elementwise convex
/// hull of the inputs.
std::pair<Tensor, EmaAttentionState> scm_forward(std::span<const Tensor> features,
                                                 const EmaAttentionState& state,
                                                 const Eigen::VectorXd& new_scores);

/// Linear scoring head over channel-pooled features; a stand-in for the
/// score network that would feed the EMA attention in a full detector.
struct ScoringHead {
    Eigen::VectorXd w;
    double b = 0;
    static ScoringHead seeded(Eigen::Index channels, std::uint64_t seed);
};

/// Global-average-pools each channel, then applies the linear head.
double pooled_score(const Tensor& f, const ScoringHead& head);

/// Toy composition mirroring the deployed ordering: global attention per
/// frame, an identity stand-in where the multi-scale pooling block would sit,
/// then EMA-weighted fusion across the frames.
std::pair<Tensor, EmaAttentionState> toy_pipeline_forward(std::span<const Tensor> frames,
                                                          const GomParams& p,
                                                          const ScoringHead& head,
                                                          const EmaAttentionState& state);

}  // namespace detkit
