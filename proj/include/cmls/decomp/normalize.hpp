#pragma once

#include "cmls/field.hpp"
#include "cmls/io/container.hpp"

#include <span>

namespace cmls::decomp {

/// Per-field z-score statistics. A constant field gets std = 1 and is flagged.
struct NormStats {
    double mean = 0.0;
    double std = 1.0;
    bool constant = false;

    double normalize(double x) const { return (x - mean) / std; }
    double denormalize(double z) const { return z * std + mean; }

    void to_metadata(io::Metadata& meta, const std::string& prefix) const;
    static NormStats from_metadata(const io::Metadata& meta, const std::string& prefix);
};

/// Statistics over every value of every series given (the training split).
NormStats compute_stats(std::span<const FieldSeries* const> series);
NormStats compute_stats(std::span<const double> values);

Field normalize(const Field& f, const NormStats& s);
Field denormalize(const Field& f, const NormStats& s);
FieldSeries normalize(const FieldSeries& f, const NormStats& s);
FieldSeries denormalize(const FieldSeries& f, const NormStats& s);

} // namespace cmls::decomp
