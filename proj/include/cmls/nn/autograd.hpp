#pragma once

#include "cmls/nn/tensor.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cmls::nn {

struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
    bool requires_grad = false;
    std::string label;  // parameter id for leaves, op name otherwise

    Tensor& ensure_grad();
};

/// Handle to a value in the recorded computation. Copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false, std::string label = {});

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    Tensor& grad() { return node_->ensure_grad(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::string& label() const { return node_->label; }
    const std::shared_ptr<Node>& node() const { return node_; }

    static Var from_node(std::shared_ptr<Node> node);

private:
    std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Accumulates d(loss)/d(leaf) into every requires-grad leaf reachable from
/// `loss`. Leaf gradients add onto what is already there; intermediate
/// gradients are reset on each call.
void backward(const Var& loss);

// ---- operations -----------------------------------------------------------

// x [M, K], weight [N, K], bias [N] -> [M, N]
Var dense(const Var& x, const Var& weight, const Var& bias);

struct ConvGeometry {
    std::array<std::size_t, 3> wide{1, 1, 1};    // extent on the stride-1 side
    std::array<std::size_t, 3> narrow{1, 1, 1};  // extent on the strided side
    std::array<std::size_t, 3> kernel{1, 1, 1};
    std::array<std::size_t, 3> stride{1, 1, 1};
    std::array<std::size_t, 3> pad_lo{0, 0, 0};

    std::size_t wide_size() const { return wide[0] * wide[1] * wide[2]; }
    std::size_t narrow_size() const { return narrow[0] * narrow[1] * narrow[2]; }
    std::size_t kernel_size() const { return kernel[0] * kernel[1] * kernel[2]; }
};

// "Same" zero padding: narrow = ceil(wide / stride) on every axis.
ConvGeometry same_padding_geometry(const std::vector<std::size_t>& wide,
                                   std::size_t kernel, std::size_t stride);

// x [B, Cin, wide...], weight [Cout, Cin * K], bias [Cout] -> [B, Cout, narrow...]
Var conv(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& geom);
// Adjoint of `conv` in its input: x [B, Cin, narrow...],
// weight [Cin, Cout * K], bias [Cout] -> [B, Cout, wide...]
Var conv_transpose(const Var& x, const Var& weight, const Var& bias,
                   const ConvGeometry& geom);

Var tanh(const Var& x);
Var relu(const Var& x);
Var reshape(const Var& x, Shape shape);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& x, double factor);
Var sum(const Var& x);                     // -> [1]
Var mean(const Var& x);                    // -> [1]
Var mse(const Var& pred, const Var& target);  // mean of squared differences -> [1]

// Column-wise concatenation of [M, n_i] matrices -> [M, sum n_i].
Var concat_cols(const std::vector<Var>& parts);
// x [M, N] -> [M, count] taking columns [begin, begin + count).
Var slice_cols(const Var& x, std::size_t begin, std::size_t count);
// src [R, L]; row_index.size() == M * P; entry -1 selects a zero row.
// Result [M, P * L] where row m is src rows row_index[m*P .. m*P+P) side by side.
Var gather_rows(const Var& src, const std::vector<long>& row_index, std::size_t per_row);

} // namespace cmls::nn
