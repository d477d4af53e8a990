#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cmls::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Every extent is positive; a default
/// constructed tensor is empty (rank 0, no values) and acts as "absent".
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& storage() { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    // Same values under a new shape of equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(double value);
    bool all_finite() const;

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

private:
    Shape shape_;
    std::vector<double> values_;
};

bool operator==(const Tensor& a, const Tensor& b);

} // namespace cmls::nn
