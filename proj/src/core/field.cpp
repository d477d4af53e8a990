#include "cmls/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmls {

std::size_t cell_count(const Extents& extents)
{
    if (extents.empty()) return 0;
    std::size_t n = 1;
    for (auto e : extents) n *= e;
    return n;
}

std::string extents_str(const Extents& extents)
{
    std::string s;
    for (std::size_t i = 0; i < extents.size(); ++i) s += (i ? "x" : "") + std::to_string(extents[i]);
    return s;
}

Field::Field(Extents e, double fill) : extents(std::move(e))
{
    if (extents.size() < 2 || extents.size() > 3)
        throw std::invalid_argument("fields are 2-D or 3-D, got extents " + extents_str(extents));
    values.assign(cell_count(extents), fill);
}

std::size_t Field::index(std::size_t i, std::size_t j, std::size_t k) const
{
    return extents.size() == 2 ? i * extents[1] + j : (i * extents[1] + j) * extents[2] + k;
}

std::string to_string(FieldRole role) { return role == FieldRole::solution ? "solution" : "condition"; }

FieldRole parse_role(const std::string& text)
{
    if (text == "solution") return FieldRole::solution;
    if (text == "condition") return FieldRole::condition;
    throw std::invalid_argument("unknown field role '" + text + "'");
}

FieldSeries::FieldSeries(std::string n, FieldRole r, Extents e, std::size_t s, std::string u)
    : name(std::move(n)), role(r), units(std::move(u)), extents(std::move(e)), steps(s)
{
    if (extents.size() < 2 || extents.size() > 3)
        throw std::invalid_argument("series '" + name + "': extents " + extents_str(extents) + " not 2-D or 3-D");
    values.assign(steps * cell_count(extents), 0.0f);
}

std::span<float> FieldSeries::frame(std::size_t t)
{
    if (t >= steps) throw std::out_of_range("series '" + name + "': frame " + std::to_string(t) + " of " + std::to_string(steps));
    return std::span<float>(values).subspan(t * frame_size(), frame_size());
}

std::span<const float> FieldSeries::frame(std::size_t t) const
{
    if (t >= steps) throw std::out_of_range("series '" + name + "': frame " + std::to_string(t) + " of " + std::to_string(steps));
    return std::span<const float>(values).subspan(t * frame_size(), frame_size());
}

Field FieldSeries::field(std::size_t t) const
{
    Field f(extents);
    const auto src = frame(t);
    std::copy(src.begin(), src.end(), f.values.begin());
    return f;
}

void FieldSeries::set_frame(std::size_t t, const Field& f)
{
    if (f.extents != extents)
        throw std::invalid_argument("series '" + name + "': frame extents " + extents_str(f.extents) + " vs " +
                                    extents_str(extents));
    auto dst = frame(t);
    std::transform(f.values.begin(), f.values.end(), dst.begin(), [](double v) { return static_cast<float>(v); });
}

bool FieldSeries::all_finite() const
{
    return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

const FieldSeries& find_series(const SeriesSet& set, const std::string& name)
{
    for (const auto& s : set)
        if (s.name == name) return s;
    throw std::out_of_range("no series named '" + name + "'");
}

} // namespace cmls
