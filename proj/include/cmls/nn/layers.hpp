#pragma once

#include "cmls/nn/autograd.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cmls::nn {

using Rng = std::mt19937_64;

/// Trainable leaf: a value with a gradient of identical shape and a unique id.
class Parameter {
public:
    Parameter(std::string id, Tensor value);
    // Copies are deep: the copy owns a fresh value and a zero gradient.
    Parameter(const Parameter& other);
    Parameter& operator=(const Parameter& other);
    Parameter(Parameter&&) noexcept = default;
    Parameter& operator=(Parameter&&) noexcept = default;

    const std::string& id() const { return id_; }
    const Var& var() const { return var_; }
    const Tensor& value() const { return var_.value(); }
    Tensor& mutable_value() { return var_.mutable_value(); }
    Tensor& grad() { return var_.grad(); }
    const Tensor& grad() const { return var_.node()->grad; }
    void zero_grad() { var_.grad().fill(0.0); }

private:
    std::string id_;
    Var var_;
};

using ParameterRefs = std::vector<Parameter*>;

void zero_grad(const ParameterRefs& params);
std::vector<Tensor> snapshot(const ParameterRefs& params);
void restore(const ParameterRefs& params, const std::vector<Tensor>& values);

enum class LayerKind { dense, conv, conv_transpose, activation };
enum class Activation { identity, relu, tanh };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

/// Declarative layer description. For dense, `in`/`out` are widths; for the
/// convolutions they are channel counts and `spatial_rank` is 2 or 3.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t spatial_rank = 0;
    Activation activation = Activation::identity;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t rank);
    static LayerSpec conv_transpose(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                    std::size_t rank);
    static LayerSpec act(Activation a);

    std::string serialize() const;
    static LayerSpec parse(const std::string& text);
    bool operator==(const LayerSpec&) const = default;
};

class Layer {
public:
    // Glorot-uniform weights, zero biases.
    Layer(std::string id, LayerSpec spec, Rng& rng);

    const std::string& id() const { return id_; }
    const LayerSpec& spec() const { return spec_; }

    /// Per-sample output shape (batch axis excluded); throws naming the layer
    /// when `in` is incompatible.
    Shape output_shape(const Shape& in) const;
    /// `x` carries a leading batch axis.
    Var forward(const Var& x) const;

    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }

private:
    [[noreturn]] void shape_error(const Shape& got, const std::string& expected) const;

    std::string id_;
    LayerSpec spec_;
    std::vector<Parameter> params_;
};

/// Layers applied in order, with shapes checked once at construction and on
/// every forward pass.
class Sequential {
public:
    Sequential() = default;
    Sequential(std::string id, Shape input_shape, const std::vector<LayerSpec>& specs, Rng& rng);

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return output_shape_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    Var forward(const Var& x) const;
    ParameterRefs parameters();
    std::vector<LayerSpec> specs() const;

private:
    std::string id_;
    Shape input_shape_;
    Shape output_shape_;
    std::vector<Layer> layers_;
};

/// Dense stack: widths.front() -> ... -> widths.back() with `hidden` after
/// every layer except the last, which gets `last`.
std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& widths, Activation hidden,
                                 Activation last = Activation::identity);

} // namespace cmls::nn
