#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <span>
#include <vector>

namespace detkit {

/// Dense row-major tensor of doubles. Forward-only: no autodiff, no views,
/// no broadcasting. 64-bit storage throughout so downstream gradient checks
/// keep full precision.
struct Tensor {
    std::vector<Eigen::Index> shape;
    Eigen::ArrayXd data;  // flat, row-major

    Tensor() = default;
    Tensor(std::vector<Eigen::Index> shape_, Eigen::ArrayXd data_);

    static Tensor zeros(std::vector<Eigen::Index> shape);
    static Tensor full(std::vector<Eigen::Index> shape, double value);

    Eigen::Index rank() const { return static_cast<Eigen::Index>(shape.size()); }
    Eigen::Index size() const { return data.size(); }

    /// Flat offset of a multi-index (row-major).
    Eigen::Index offset(std::span<const Eigen::Index> idx) const;

    double at(std::initializer_list<Eigen::Index> idx) const {
        return data[offset({idx.begin(), idx.size()})];
    }
    double& at(std::initializer_list<Eigen::Index> idx) {
        return data[offset({idx.begin(), idx.size()})];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

/// Rearranges dimensions. `axes` must be a permutation of 0..rank-1; output
/// shape is the permuted shape and out[i0,..] = in[i_axes[0],..] style
/// reindexing, bit-exact.
Tensor permute(const Tensor& t, std::span<const Eigen::Index> axes);
Tensor permute(const Tensor& t, std::initializer_list<Eigen::Index> axes);

/// Standard matrix product of two rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Same-size cross-correlation with zero padding. `input` is C x H x W,
/// `kernels` is K x C x kh x kw with kh, kw odd; output is K x H x W.
Tensor conv2d(const Tensor& input, const Tensor& kernels);

Tensor sigmoid(const Tensor& t);
Tensor relu(const Tensor& t);

/// Elementwise product; shapes must match exactly.
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Max-subtracted softmax; safe for scores of large magnitude.
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

}  // namespace detkit
