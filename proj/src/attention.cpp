#include "detkit/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "detkit/ema.hpp"
#include "detkit/rng.hpp"

namespace detkit {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void fill_uniform(std::mt19937_64& rng, double* dst, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) dst[i] = uniform(rng, -0.1, 0.1);
}

void require_feature_shape(const Tensor& f, const GomParams& p, const char* what) {
    if (f.rank() != 3)
        throw std::invalid_argument(std::string(what) + ": feature tensor must be C x H x W");
    if (f.shape[0] != p.channels)
        throw std::invalid_argument(std::string(what) + ": feature has " +
                                    std::to_string(f.shape[0]) + " channels, params expect " +
                                    std::to_string(p.channels));
}

}  // namespace

GomParams GomParams::seeded(Eigen::Index channels, Eigen::Index reduction_ratio,
                            Eigen::Index kernel_size, std::uint64_t seed) {
    GomParams p;
    p.channels = channels;
    p.reduction_ratio = reduction_ratio;
    p.kernel_size = kernel_size;
    if (channels < 1 || reduction_ratio < 1 || channels % reduction_ratio != 0)
        throw std::invalid_argument("channel count must be a positive multiple of the reduction ratio");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("kernel size must be odd and positive");

    const Eigen::Index hidden = channels / reduction_ratio;
    std::mt19937_64 rng(seed);

    p.mlp_w1.resize(hidden, channels);
    p.mlp_b1.resize(hidden);
    p.mlp_w2.resize(channels, hidden);
    p.mlp_b2.resize(channels);
    // fixed fill order so a seed pins every weight
    for (Eigen::Index i = 0; i < hidden; ++i) fill_uniform(rng, p.mlp_w1.row(i).data(), channels);
    fill_uniform(rng, p.mlp_b1.data(), hidden);
    for (Eigen::Index i = 0; i < channels; ++i) fill_uniform(rng, p.mlp_w2.row(i).data(), hidden);
    fill_uniform(rng, p.mlp_b2.data(), channels);

    p.conv1_kernels = Tensor::zeros({hidden, channels, kernel_size, kernel_size});
    p.conv2_kernels = Tensor::zeros({channels, hidden, kernel_size, kernel_size});
    fill_uniform(rng, p.conv1_kernels.data.data(), p.conv1_kernels.size());
    fill_uniform(rng, p.conv2_kernels.data.data(), p.conv2_kernels.size());
    return p;
}

void GomParams::validate() const {
    if (channels < 1 || reduction_ratio < 1 || channels % reduction_ratio != 0)
        throw std::invalid_argument("channel count must be a positive multiple of the reduction ratio");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("kernel size must be odd and positive");
    const Eigen::Index hidden = channels / reduction_ratio;
    if (mlp_w1.rows() != hidden || mlp_w1.cols() != channels || mlp_b1.size() != hidden ||
        mlp_w2.rows() != channels || mlp_w2.cols() != hidden || mlp_b2.size() != channels)
        throw std::invalid_argument("MLP weight shapes inconsistent with channels/reduction");
    const std::vector<Eigen::Index> k1{hidden, channels, kernel_size, kernel_size};
    const std::vector<Eigen::Index> k2{channels, hidden, kernel_size, kernel_size};
    if (conv1_kernels.shape != k1 || conv2_kernels.shape != k2)
        throw std::invalid_argument("conv kernel shapes inconsistent with channels/reduction/kernel size");
}

Tensor channel_attention(const Tensor& f1, const GomParams& p) {
    p.validate();
    require_feature_shape(f1, p, "channel_attention");
    const Eigen::Index C = f1.shape[0], H = f1.shape[1], W = f1.shape[2];
    const Eigen::Index sites = W * H;

    // C x H x W -> W x H x C puts one channel vector per spatial site
    Tensor rearranged = permute(f1, {2, 1, 0});
    Eigen::Map<const RowMat> x(rearranged.data.data(), sites, C);

    RowMat hidden = (x * p.mlp_w1.transpose()).rowwise() + p.mlp_b1.transpose();
    hidden = hidden.cwiseMax(0.0);
    RowMat out = (hidden * p.mlp_w2.transpose()).rowwise() + p.mlp_b2.transpose();

    Tensor whc = Tensor::zeros({W, H, C});
    Eigen::Map<RowMat>(whc.data.data(), sites, C) = out;
    return sigmoid(permute(whc, {2, 1, 0}));
}

Tensor spatial_attention(const Tensor& f2, const GomParams& p) {
    p.validate();
    require_feature_shape(f2, p, "spatial_attention");
    Tensor squeezed = relu(conv2d(f2, p.conv1_kernels));
    return sigmoid(conv2d(squeezed, p.conv2_kernels));
}

Tensor gom_forward(const Tensor& f1, const GomParams& p, const AttentionOverride& forced) {
    const Tensor mc = forced.channel_map ? *forced.channel_map : channel_attention(f1, p);
    if (!mc.same_shape(f1)) throw std::invalid_argument("channel attention map shape mismatch");
    const Tensor f2 = hadamard(mc, f1);
    const Tensor ms = forced.spatial_map ? *forced.spatial_map : spatial_attention(f2, p);
    if (!ms.same_shape(f2)) throw std::invalid_argument("spatial attention map shape mismatch");
    return hadamard(ms, f2);
}

void EmaAttentionState::validate() const {
    if (!(decay > 0.0 && decay <= 1.0))
        throw std::invalid_argument("decay rate must lie in (0, 1]");
    if (!scores.allFinite()) throw std::invalid_argument("attention scores must be finite");
    if (step < 0) throw std::invalid_argument("step must be nonnegative");
}

EmaAttentionState ema_update(const EmaAttentionState& state, const Eigen::VectorXd& new_scores) {
    state.validate();
    if (new_scores.size() != state.scores.size())
        throw std::invalid_argument("ema_update: score vector length mismatch");
    EmaAttentionState next = state;
    for (Eigen::Index i = 0; i < new_scores.size(); ++i)
        next.scores[i] = ema_mix(state.scores[i], new_scores[i], state.decay);
    next.step = state.step + 1;
    return next;
}

Eigen::VectorXd attention_weights(const EmaAttentionState& state) {
    state.validate();
    return softmax(state.scores);
}

std::pair<Tensor, EmaAttentionState> scm_forward(std::span<const Tensor> features,
                                                 const EmaAttentionState& state,
                                                 const Eigen::VectorXd& new_scores) {
    if (features.empty()) throw std::invalid_argument("scm_forward: no feature tensors");
    if (static_cast<Eigen::Index>(features.size()) != state.scores.size() ||
        new_scores.size() != state.scores.size())
        throw std::invalid_argument("scm_forward: feature/score count mismatch");
    for (const Tensor& f : features)
        if (!f.same_shape(features[0]))
            throw std::invalid_argument("scm_forward: feature tensors must share a shape");

    EmaAttentionState next = ema_update(state, new_scores);
    const Eigen::VectorXd w = attention_weights(next);

    Tensor out = Tensor::zeros(features[0].shape);
    for (std::size_t i = 0; i < features.size(); ++i)
        out.data += w[static_cast<Eigen::Index>(i)] * features[i].data;
    return {std::move(out), std::move(next)};
}

ScoringHead ScoringHead::seeded(Eigen::Index channels, std::uint64_t seed) {
    ScoringHead head;
    head.w.resize(channels);
    std::mt19937_64 rng(seed);
    fill_uniform(rng, head.w.data(), channels);
    head.b = uniform(rng, -0.1, 0.1);
    return head;
}

double pooled_score(const Tensor& f, const ScoringHead& head) {
    if (f.rank() != 3) throw std::invalid_argument("pooled_score: feature tensor must be C x H x W");
    const Eigen::Index C = f.shape[0], sites = f.shape[1] * f.shape[2];
    if (head.w.size() != C) throw std::invalid_argument("pooled_score: head width mismatch");
    double score = head.b;
    for (Eigen::Index c = 0; c < C; ++c)
        score += head.w[c] * f.data.segment(c * sites, sites).mean();
    return score;
}

std::pair<Tensor, EmaAttentionState> toy_pipeline_forward(std::span<const Tensor> frames,
                                                          const GomParams& p,
                                                          const ScoringHead& head,
                                                          const EmaAttentionState& state) {
    if (frames.empty()) throw std::invalid_argument("toy_pipeline_forward: no frames");
    std::vector<Tensor> refined;
    refined.reserve(frames.size());
    Eigen::VectorXd scores(static_cast<Eigen::Index>(frames.size()));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        refined.push_back(gom_forward(frames[i], p));  // pooling block would follow here
        scores[static_cast<Eigen::Index>(i)] = pooled_score(refined.back(), head);
    }
    return scm_forward(refined, state, scores);
}

}  // namespace detkit
