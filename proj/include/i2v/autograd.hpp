#pragma once

// Minimal reverse-mode differentiation over Tensor<T>. A Tape records nodes
// in creation order; backward() walks them in reverse. Nodes whose inputs
// need no gradient carry no backward closure, so an inference pass over
// frozen parameters costs nothing extra.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "i2v/tensor.hpp"

namespace i2v::ag {

/// Trainable tensor. The gradient is an accumulator that tapes with
/// recording enabled write into; inference tapes never touch it.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    mutable Tensor<T> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
    void zero_grad() const {
        if (!grad.same_shape(value)) grad = Tensor<T>(value.shape());
        else grad.fill(T(0));
    }
};

template <typename T>
class Tape;

template <typename T>
class Var {
public:
    Var() = default;
    Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape<T>* tape() const { return tape_; }
    const Tensor<T>& value() const { return tape_->value(id_); }
    const std::vector<int>& shape() const { return value().shape(); }
    T item() const { return value()[0]; }

private:
    Tape<T>* tape_ = nullptr;
    int id_ = -1;
};

template <typename T>
class Tape {
public:
    using Backward = std::function<void(Tape&, int)>;

    // With recording off, parameters bind as constants and no backward
    // closures are kept.
    explicit Tape(bool record = true) : record_(record) {}
    bool recording() const { return record_; }

    Var<T> constant(Tensor<T> v);
    Var<T> param(const Parameter<T>& p);
    Var<T> push(Tensor<T> value, bool needs_grad, Backward backward);

    // Seeds d(loss)/d(loss) = seed and accumulates into trainable parameters.
    void backward(const Var<T>& loss, T seed = T(1));

    const Tensor<T>& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    Tensor<T>& grad(int id);
    bool has_grad(int id) const { return !nodes_[id].grad.empty(); }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        Backward backward;
        const Parameter<T>* param = nullptr;
    };
    std::vector<Node> nodes_;
    bool record_ = true;
};

// Convolution with square kernel. w: (Cout, Cin, K, K); b: (Cout) or invalid.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);
// Transposed convolution. w: (Cin, Cout, K, K).
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);
// Per-channel normalization over the spatial extent of one sample (batch
// normalization with batch size one), followed by affine gamma/beta.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
// a + s * b
template <typename T>
Var<T> add_scaled(const Var<T>& a, const Var<T>& b, T s);
// Elementwise product with a constant tensor of identical shape.
template <typename T>
Var<T> mul_const(const Var<T>& a, const Tensor<T>& m);

// Softmax over the spatial extent of each channel of a (C, h, w) tensor.
template <typename T>
Var<T> spatial_softmax(const Var<T>& x);
// (C, h, w) probability maps -> (C, 2) expected (x, y) in pixel units of an
// image_h x image_w frame. Heatmap cell centers map to pixel coordinates via
// (j + 0.5) * scale - 0.5.
template <typename T>
Var<T> expected_coordinates(const Var<T>& p, int image_h, int image_w);

// (C, h, w) -> (C)
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);
// (C) . w(C) + b(1) -> (1)
template <typename T>
Var<T> dense_scalar(const Var<T>& x, const Var<T>& w, const Var<T>& b);

// Mean absolute difference (L1 with mean reduction) -> (1)
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);
// Euclidean norm of the flattened difference -> (1)
template <typename T>
Var<T> l2_distance(const Var<T>& a, const Var<T>& b);
// -log(max(x, eps)) on a single-element tensor
template <typename T>
Var<T> neg_log(const Var<T>& x, T eps);
// -log(max(1 - x, eps)) on a single-element tensor
template <typename T>
Var<T> neg_log1m(const Var<T>& x, T eps);
// sum_i w_i * term_i over single-element tensors
template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<Var<T>, T>>& terms);

}  // namespace i2v::ag
