#include "detkit/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace detkit {

namespace {

Eigen::Index checked_numel(const std::vector<Eigen::Index>& shape) {
    Eigen::Index n = 1;
    for (Eigen::Index d : shape) {
        if (d < 1) throw std::invalid_argument("tensor dimension sizes must be >= 1");
        n *= d;
    }
    return n;
}

std::vector<Eigen::Index> row_major_strides(const std::vector<Eigen::Index>& shape) {
    std::vector<Eigen::Index> strides(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        strides[i] = strides[i + 1] * shape[i + 1];
    return strides;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Tensor::Tensor(std::vector<Eigen::Index> shape_, Eigen::ArrayXd data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (checked_numel(shape) != data.size())
        throw std::invalid_argument("tensor data length does not match shape");
}

Tensor Tensor::zeros(std::vector<Eigen::Index> shape) {
    Eigen::Index n = checked_numel(shape);
    return Tensor(std::move(shape), Eigen::ArrayXd::Zero(n));
}

Tensor Tensor::full(std::vector<Eigen::Index> shape, double value) {
    Eigen::Index n = checked_numel(shape);
    return Tensor(std::move(shape), Eigen::ArrayXd::Constant(n, value));
}

Eigen::Index Tensor::offset(std::span<const Eigen::Index> idx) const {
    if (static_cast<Eigen::Index>(idx.size()) != rank())
        throw std::invalid_argument("index rank does not match tensor rank");
    Eigen::Index off = 0, stride = 1;
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
        if (idx[i] < 0 || idx[i] >= shape[i]) throw std::out_of_range("tensor index out of range");
        off += idx[i] * stride;
        stride *= shape[i];
    }
    return off;
}

Tensor permute(const Tensor& t, std::span<const Eigen::Index> axes) {
    const auto r = t.rank();
    if (static_cast<Eigen::Index>(axes.size()) != r)
        throw std::invalid_argument("permute: axes length must equal tensor rank");
    std::vector<bool> seen(static_cast<std::size_t>(r), false);
    for (Eigen::Index a : axes) {
        if (a < 0 || a >= r || seen[static_cast<std::size_t>(a)])
            throw std::invalid_argument("permute: axes must be a permutation of 0..rank-1");
        seen[static_cast<std::size_t>(a)] = true;
    }

    std::vector<Eigen::Index> out_shape(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = t.shape[axes[i]];

    Tensor out = Tensor::zeros(out_shape);
    const auto in_strides = row_major_strides(t.shape);

    // walk the output in row-major order, tracking the source offset directly
    std::vector<Eigen::Index> idx(axes.size(), 0);
    for (Eigen::Index flat = 0; flat < out.size(); ++flat) {
        Eigen::Index src = 0;
        for (std::size_t i = 0; i < axes.size(); ++i) src += idx[i] * in_strides[axes[i]];
        out.data[flat] = t.data[src];
        for (int i = static_cast<int>(axes.size()) - 1; i >= 0; --i) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

Tensor permute(const Tensor& t, std::initializer_list<Eigen::Index> axes) {
    return permute(t, std::span<const Eigen::Index>(axes.begin(), axes.size()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: both operands must be rank-2");
    if (a.shape[1] != b.shape[0])
        throw std::invalid_argument("matmul: inner dimensions do not match (" +
                                    std::to_string(a.shape[1]) + " vs " + std::to_string(b.shape[0]) + ")");
    Eigen::Map<const RowMat> ma(a.data.data(), a.shape[0], a.shape[1]);
    Eigen::Map<const RowMat> mb(b.data.data(), b.shape[0], b.shape[1]);
    Tensor out = Tensor::zeros({a.shape[0], b.shape[1]});
    Eigen::Map<RowMat>(out.data.data(), a.shape[0], b.shape[1]) = ma * mb;
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels) {
    if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be C x H x W");
    if (kernels.rank() != 4) throw std::invalid_argument("conv2d: kernels must be K x C x kh x kw");
    const Eigen::Index C = input.shape[0], H = input.shape[1], W = input.shape[2];
    const Eigen::Index K = kernels.shape[0], kh = kernels.shape[2], kw = kernels.shape[3];
    if (kernels.shape[1] != C)
        throw std::invalid_argument("conv2d: kernel channel count does not match input");
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("conv2d: kernel sides must be odd for same-size padding");

    const Eigen::Index ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    Tensor out = Tensor::zeros({K, H, W});

    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index oy = 0; oy < H; ++oy) {
            for (Eigen::Index ox = 0; ox < W; ++ox) {
                double acc = 0.0;
                for (Eigen::Index c = 0; c < C; ++c) {
                    const double* in_ch = input.data.data() + c * H * W;
                    const double* kk = kernels.data.data() + ((k * C + c) * kh) * kw;
                    for (Eigen::Index dy = 0; dy < kh; ++dy) {
                        const Eigen::Index y = oy + dy - ph;
                        if (y < 0 || y >= H) continue;
                        for (Eigen::Index dx = 0; dx < kw; ++dx) {
                            const Eigen::Index x = ox + dx - pw;
                            if (x < 0 || x >= W) continue;
                            acc += in_ch[y * W + x] * kk[dy * kw + dx];
                        }
                    }
                }
                out.data[(k * H + oy) * W + ox] = acc;
            }
        }
    }
    return out;
}

Tensor sigmoid(const Tensor& t) {
    Tensor out = t;
    out.data = 1.0 / (1.0 + (-t.data).exp());
    return out;
}

Tensor relu(const Tensor& t) {
    Tensor out = t;
    out.data = t.data.max(0.0);
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("hadamard: shapes must match");
    Tensor out = a;
    out.data = a.data * b.data;
    return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    if (scores.size() == 0) throw std::invalid_argument("softmax: empty input");
    const double m = scores.maxCoeff();
    Eigen::ArrayXd e = (scores.array() - m).exp();
    return (e / e.sum()).matrix();
}

}  // namespace detkit
