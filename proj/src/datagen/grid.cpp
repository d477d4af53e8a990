#include "cmls/datagen/grid.hpp"

#include "stencil.hpp"

namespace cmls::datagen {

double GridSpec::cell_volume() const
{
    double v = 1.0;
    for (std::size_t a = 0; a < dims(); ++a) v *= spacing(a);
    return v;
}

void GridSpec::validate() const
{
    if (dims() < 2 || dims() > 3) throw std::invalid_argument("grid must be 2-D or 3-D, got " + extents_str(extents));
    if (lengths.size() != dims())
        throw std::invalid_argument("grid has " + std::to_string(dims()) + " extents but " +
                                    std::to_string(lengths.size()) + " lengths");
    for (std::size_t a = 0; a < dims(); ++a) {
        if (extents[a] < 4)
            throw std::invalid_argument("grid extent " + std::to_string(extents[a]) + " on axis " +
                                        std::to_string(a) + " is below 4");
        if (!(lengths[a] > 0.0)) throw std::invalid_argument("grid lengths must be positive");
    }
    if (!(dt > 0.0)) throw std::invalid_argument("grid dt must be positive");
    if (steps < 2) throw std::invalid_argument("grid needs at least 2 stored frames");
    if (stride < 1) throw std::invalid_argument("grid stride must be >= 1");
}

void GridSpec::to_metadata(io::Metadata& meta) const
{
    meta["grid.extents"] = io::join_sizes(extents);
    std::string ls;
    for (std::size_t a = 0; a < lengths.size(); ++a) ls += (a ? "," : "") + io::format_double(lengths[a]);
    meta["grid.lengths"] = ls;
    meta["grid.dt"] = io::format_double(dt);
    meta["grid.steps"] = std::to_string(steps);
    meta["grid.stride"] = std::to_string(stride);
}

GridSpec GridSpec::from_metadata(const io::Metadata& meta)
{
    GridSpec g;
    g.extents = io::get_sizes(meta, "grid.extents");
    const std::string& ls = io::get(meta, "grid.lengths");
    std::size_t pos = 0;
    while (pos <= ls.size()) {
        auto end = ls.find(',', pos);
        if (end == std::string::npos) end = ls.size();
        if (end > pos) g.lengths.push_back(std::stod(ls.substr(pos, end - pos)));
        pos = end + 1;
    }
    g.dt = io::get_double(meta, "grid.dt");
    g.steps = io::get_size(meta, "grid.steps");
    g.stride = io::get_size(meta, "grid.stride");
    return g;
}

namespace detail {

void neumann_laplacian(const Field& f, const std::vector<double>& inv_h2, Field& out)
{
    const auto& e = f.extents;
    const std::size_t d = e.size();
    std::size_t stride[3] = {1, 1, 1};
    for (std::size_t a = d; a-- > 0;) stride[a] = a + 1 < d ? stride[a + 1] * e[a + 1] : 1;
    const std::size_t n = f.values.size();
    const double* v = f.values.data();
    double* o = out.values.data();
    std::size_t c[3] = {0, 0, 0};
    for (std::size_t idx = 0; idx < n; ++idx) {
        double acc = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double lo = c[a] > 0 ? v[idx - stride[a]] : v[idx];
            const double hi = c[a] + 1 < e[a] ? v[idx + stride[a]] : v[idx];
            acc += (lo - 2.0 * v[idx] + hi) * inv_h2[a];
        }
        o[idx] = acc;
        for (std::size_t a = d; a-- > 0;) {
            if (++c[a] < e[a]) break;
            c[a] = 0;
        }
    }
}

} // namespace detail

} // namespace cmls::datagen
