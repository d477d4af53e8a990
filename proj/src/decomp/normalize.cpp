#include "cmls/decomp/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmls::decomp {

void NormStats::to_metadata(io::Metadata& meta, const std::string& prefix) const
{
    meta[prefix + ".mean"] = io::format_double(mean);
    meta[prefix + ".std"] = io::format_double(std);
    meta[prefix + ".constant"] = constant ? "1" : "0";
}

NormStats NormStats::from_metadata(const io::Metadata& meta, const std::string& prefix)
{
    NormStats s;
    s.mean = io::get_double(meta, prefix + ".mean");
    s.std = io::get_double(meta, prefix + ".std");
    s.constant = io::get(meta, prefix + ".constant") == "1";
    if (!(s.std > 0.0)) throw io::FormatError("normalisation std must be positive under '" + prefix + "'");
    return s;
}

namespace {

template <class Range>
NormStats stats_of(const Range& ranges)
{
    // two-pass for accuracy
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : ranges)
        for (auto v : r) sum += double(v), ++n;
    if (n == 0) throw std::invalid_argument("cannot compute normalisation statistics of an empty set");
    NormStats s;
    s.mean = sum / double(n);
    double sq = 0.0;
    for (const auto& r : ranges)
        for (auto v : r) sq += (double(v) - s.mean) * (double(v) - s.mean);
    const double sd = std::sqrt(sq / double(n));
    const double scale = std::max(1.0, std::abs(s.mean));
    if (!(sd > 1e-12 * scale)) {
        s.std = 1.0;
        s.constant = true;
    }
    else {
        s.std = sd;
    }
    return s;
}

} // namespace

NormStats compute_stats(std::span<const FieldSeries* const> series)
{
    std::vector<std::span<const float>> ranges;
    for (const auto* s : series) ranges.emplace_back(s->values);
    return stats_of(ranges);
}

NormStats compute_stats(std::span<const double> values)
{
    return stats_of(std::vector<std::span<const double>>{values});
}

Field normalize(const Field& f, const NormStats& s)
{
    Field out = f;
    for (auto& v : out.values) v = s.normalize(v);
    return out;
}

Field denormalize(const Field& f, const NormStats& s)
{
    Field out = f;
    for (auto& v : out.values) v = s.denormalize(v);
    return out;
}

FieldSeries normalize(const FieldSeries& f, const NormStats& s)
{
    FieldSeries out = f;
    for (auto& v : out.values) v = float(s.normalize(v));
    return out;
}

FieldSeries denormalize(const FieldSeries& f, const NormStats& s)
{
    FieldSeries out = f;
    for (auto& v : out.values) v = float(s.denormalize(v));
    return out;
}

} // namespace cmls::decomp
