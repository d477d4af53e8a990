#pragma once

#include "cmls/field.hpp"
#include "cmls/io/container.hpp"

#include <stdexcept>

namespace cmls::datagen {

/// Uniform grid plus time discretisation. `dt` is the solver step; one frame
/// is stored every `stride` solver steps, `steps` frames in total.
struct GridSpec {
    Extents extents;
    std::vector<double> lengths;
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t stride = 1;

    std::size_t dims() const { return extents.size(); }
    double spacing(std::size_t axis) const { return lengths.at(axis) / static_cast<double>(extents.at(axis)); }
    double cell_volume() const;
    double frame_dt() const { return dt * static_cast<double>(stride); }

    /// Throws std::invalid_argument unless dims in {2,3}, extents >= 4,
    /// lengths > 0, dt > 0, steps >= 2 and stride >= 1.
    void validate() const;

    void to_metadata(io::Metadata& meta) const;
    static GridSpec from_metadata(const io::Metadata& meta);
    bool operator==(const GridSpec&) const = default;
};

/// Refusal of an explicit scheme whose stability number exceeds its bound.
class StabilityError : public std::domain_error {
public:
    StabilityError(const std::string& what, double number, double bound)
        : std::domain_error(what), number_(number), bound_(bound)
    {
    }
    double number() const { return number_; }
    double bound() const { return bound_; }

private:
    double number_;
    double bound_;
};

} // namespace cmls::datagen
