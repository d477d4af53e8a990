#include "cmls/nn/layers.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cmls::nn {

Parameter::Parameter(std::string id, Tensor value) : id_(std::move(id)), var_(std::move(value), true, id_)
{
    var_.grad();
}

Parameter::Parameter(const Parameter& other) : Parameter(other.id_, other.value()) {}

Parameter& Parameter::operator=(const Parameter& other)
{
    if (this != &other) *this = Parameter(other);
    return *this;
}

void zero_grad(const ParameterRefs& params)
{
    for (auto* p : params) p->zero_grad();
}

std::vector<Tensor> snapshot(const ParameterRefs& params)
{
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (auto* p : params) out.push_back(p->value());
    return out;
}

void restore(const ParameterRefs& params, const std::vector<Tensor>& values)
{
    if (values.size() != params.size()) throw std::invalid_argument("restore: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (values[i].shape() != params[i]->value().shape())
            throw std::invalid_argument("restore: shape mismatch for " + params[i]->id() + ": " +
                                        shape_str(values[i].shape()) + " vs " +
                                        shape_str(params[i]->value().shape()));
        params[i]->mutable_value() = values[i];
    }
}

std::string to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::activation: return "activation";
    }
    return "?";
}

std::string to_string(Activation act)
{
    switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    }
    return "?";
}

Activation parse_activation(const std::string& name)
{
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out)
{
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in = in;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t rank)
{
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.in = in;
    s.out = out;
    s.kernel = kernel;
    s.stride = stride;
    s.spatial_rank = rank;
    return s;
}

LayerSpec LayerSpec::conv_transpose(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                    std::size_t rank)
{
    LayerSpec s = conv(in, out, kernel, stride, rank);
    s.kind = LayerKind::conv_transpose;
    return s;
}

LayerSpec LayerSpec::act(Activation a)
{
    LayerSpec s;
    s.kind = LayerKind::activation;
    s.activation = a;
    return s;
}

std::string LayerSpec::serialize() const
{
    std::ostringstream os;
    os << to_string(kind);
    if (kind == LayerKind::activation) {
        os << ' ' << to_string(activation);
    }
    else {
        os << " in=" << in << " out=" << out;
        if (kind != LayerKind::dense)
            os << " kernel=" << kernel << " stride=" << stride << " rank=" << spatial_rank;
    }
    return os.str();
}

LayerSpec LayerSpec::parse(const std::string& text)
{
    std::istringstream is(text);
    std::string kind;
    is >> kind;
    LayerSpec s;
    if (kind == "activation") {
        std::string a;
        is >> a;
        return act(parse_activation(a));
    }
    if (kind == "dense") s.kind = LayerKind::dense;
    else if (kind == "conv") s.kind = LayerKind::conv;
    else if (kind == "conv_transpose") s.kind = LayerKind::conv_transpose;
    else throw std::invalid_argument("unknown layer kind in '" + text + "'");
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("malformed layer spec '" + text + "'");
        const std::string key = tok.substr(0, eq);
        const std::size_t value = std::stoul(tok.substr(eq + 1));
        if (key == "in") s.in = value;
        else if (key == "out") s.out = value;
        else if (key == "kernel") s.kernel = value;
        else if (key == "stride") s.stride = value;
        else if (key == "rank") s.spatial_rank = value;
        else throw std::invalid_argument("unknown layer field '" + key + "'");
    }
    return s;
}

Layer::Layer(std::string id, LayerSpec spec, Rng& rng) : id_(std::move(id)), spec_(spec)
{
    if (spec_.kind == LayerKind::activation) return;
    if (spec_.in == 0 || spec_.out == 0) throw std::invalid_argument(id_ + ": widths must be positive");
    if (spec_.kernel < 1 || spec_.stride < 1)
        throw std::invalid_argument(id_ + ": kernel extent and stride must be >= 1");
    std::size_t k = 1;
    if (spec_.kind != LayerKind::dense) {
        if (spec_.spatial_rank < 1 || spec_.spatial_rank > 3)
            throw std::invalid_argument(id_ + ": spatial rank must be 1..3");
        for (std::size_t a = 0; a < spec_.spatial_rank; ++a) k *= spec_.kernel;
    }
    const double fan_in = static_cast<double>(spec_.in * k);
    const double fan_out = static_cast<double>(spec_.out * k);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);

    Shape wshape;
    std::size_t bias_len = spec_.out;
    switch (spec_.kind) {
    case LayerKind::dense: wshape = {spec_.out, spec_.in}; break;
    case LayerKind::conv: wshape = {spec_.out, spec_.in * k}; break;
    case LayerKind::conv_transpose: wshape = {spec_.in, spec_.out * k}; break;
    case LayerKind::activation: break;
    }
    Tensor w(wshape);
    for (auto& v : w.values()) v = dist(rng);
    params_.emplace_back(id_ + ".weight", std::move(w));
    params_.emplace_back(id_ + ".bias", Tensor({bias_len}));
}

void Layer::shape_error(const Shape& got, const std::string& expected) const
{
    throw std::invalid_argument("layer " + id_ + " (" + spec_.serialize() + "): input shape " + shape_str(got) +
                                " incompatible, expected " + expected);
}

Shape Layer::output_shape(const Shape& in) const
{
    switch (spec_.kind) {
    case LayerKind::activation: return in;
    case LayerKind::dense:
        if (in.size() != 1 || in[0] != spec_.in) shape_error(in, shape_str({spec_.in}));
        return {spec_.out};
    case LayerKind::conv:
    case LayerKind::conv_transpose: {
        if (in.size() != spec_.spatial_rank + 1 || in[0] != spec_.in) {
            Shape want{spec_.in};
            want.insert(want.end(), spec_.spatial_rank, 0);
            shape_error(in, shape_str(want) + " (0 = any extent)");
        }
        Shape out{spec_.out};
        for (std::size_t a = 1; a < in.size(); ++a)
            out.push_back(spec_.kind == LayerKind::conv ? (in[a] + spec_.stride - 1) / spec_.stride
                                                        : in[a] * spec_.stride);
        return out;
    }
    }
    return in;
}

Var Layer::forward(const Var& x) const
{
    const Shape& xs = x.shape();
    if (xs.empty()) shape_error(xs, "a batched tensor");
    const Shape sample(xs.begin() + 1, xs.end());
    Shape expected = output_shape(sample);
    expected.insert(expected.begin(), xs[0]);

    Var y;
    switch (spec_.kind) {
    case LayerKind::activation:
        y = spec_.activation == Activation::tanh   ? nn::tanh(x)
            : spec_.activation == Activation::relu ? nn::relu(x)
                                                   : x;
        break;
    case LayerKind::dense: y = dense(x, params_[0].var(), params_[1].var()); break;
    case LayerKind::conv: {
        const std::vector<std::size_t> wide(sample.begin() + 1, sample.end());
        y = conv(x, params_[0].var(), params_[1].var(), same_padding_geometry(wide, spec_.kernel, spec_.stride));
        break;
    }
    case LayerKind::conv_transpose: {
        std::vector<std::size_t> wide;
        for (std::size_t a = 1; a < sample.size(); ++a) wide.push_back(sample[a] * spec_.stride);
        y = conv_transpose(x, params_[0].var(), params_[1].var(),
                           same_padding_geometry(wide, spec_.kernel, spec_.stride));
        break;
    }
    }
    if (y.shape() != expected)
        throw std::logic_error("layer " + id_ + " produced " + shape_str(y.shape()) + ", declared " +
                               shape_str(expected));
    return y;
}

Sequential::Sequential(std::string id, Shape input_shape, const std::vector<LayerSpec>& specs, Rng& rng)
    : id_(std::move(id)), input_shape_(std::move(input_shape))
{
    Shape s = input_shape_;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        layers_.emplace_back(id_ + "." + std::to_string(i), specs[i], rng);
        s = layers_.back().output_shape(s);
    }
    output_shape_ = s;
}

Var Sequential::forward(const Var& x) const
{
    const Shape& xs = x.shape();
    if (xs.size() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(), xs.begin() + 1))
        throw std::invalid_argument(id_ + ": input " + shape_str(xs) + " does not match [batch]+" +
                                    shape_str(input_shape_));
    Var y = x;
    for (const auto& layer : layers_) y = layer.forward(y);
    return y;
}

ParameterRefs Sequential::parameters()
{
    ParameterRefs out;
    for (auto& layer : layers_)
        for (auto& p : layer.parameters()) out.push_back(&p);
    return out;
}

std::vector<LayerSpec> Sequential::specs() const
{
    std::vector<LayerSpec> out;
    for (const auto& layer : layers_) out.push_back(layer.spec());
    return out;
}

std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& widths, Activation hidden, Activation last)
{
    if (widths.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        specs.push_back(LayerSpec::dense(widths[i], widths[i + 1]));
        const Activation a = i + 2 == widths.size() ? last : hidden;
        if (a != Activation::identity) specs.push_back(LayerSpec::act(a));
    }
    return specs;
}

} // namespace cmls::nn
