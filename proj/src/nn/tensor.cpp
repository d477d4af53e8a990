#include "cmls/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cmls::nn {

std::size_t shape_size(const Shape& shape)
{
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

static void check_extents(const Shape& shape)
{
    for (auto e : shape)
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape))
{
    check_extents(shape_);
    values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values))
{
    check_extents(shape_);
    if (shape_size(shape_) != values_.size())
        throw std::invalid_argument("tensor of shape " + shape_str(shape_) + " cannot hold " +
                                    std::to_string(values_.size()) + " values");
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != values_.size())
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), values_);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool operator==(const Tensor& a, const Tensor& b)
{
    return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

} // namespace cmls::nn
