#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cmls {

using Extents = std::vector<std::size_t>;

std::size_t cell_count(const Extents& extents);
std::string extents_str(const Extents& extents);

/// Scalar field on a uniform 2-D or 3-D grid. Storage is row-major over the
/// axes (x, y[, z]), so the last axis varies fastest.
struct Field {
    Extents extents;
    std::vector<double> values;

    Field() = default;
    explicit Field(Extents e, double fill = 0.0);

    std::size_t dims() const { return extents.size(); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const;
    double& at(std::size_t i, std::size_t j, std::size_t k = 0) { return values[index(i, j, k)]; }
    double at(std::size_t i, std::size_t j, std::size_t k = 0) const { return values[index(i, j, k)]; }

    bool operator==(const Field&) const = default;
};

enum class FieldRole { solution, condition };

std::string to_string(FieldRole role);
FieldRole parse_role(const std::string& text);

/// Time sequence of one field, stored as 32-bit floats, frame-major.
struct FieldSeries {
    std::string name;
    FieldRole role = FieldRole::solution;
    std::string units;
    Extents extents;
    std::size_t steps = 0;
    std::vector<float> values;

    FieldSeries() = default;
    FieldSeries(std::string name, FieldRole role, Extents extents, std::size_t steps, std::string units = {});

    std::size_t frame_size() const { return cell_count(extents); }
    std::span<float> frame(std::size_t t);
    std::span<const float> frame(std::size_t t) const;
    Field field(std::size_t t) const;
    void set_frame(std::size_t t, const Field& f);
    bool all_finite() const;

    bool operator==(const FieldSeries&) const = default;
};

/// All series of one sample (e.g. {u, v} or {T, Q}).
using SeriesSet = std::vector<FieldSeries>;

const FieldSeries& find_series(const SeriesSet& set, const std::string& name);

} // namespace cmls
