#include "cmls/decomp/lattice.hpp"

#include <stdexcept>

namespace cmls::decomp {

namespace {

std::string coords_str(const std::vector<std::size_t>& c)
{
    std::string s = "(";
    for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
    return s + ")";
}

// Visits every cell of a patch with its offset in the global field.
template <class F>
void for_patch_cells(const Extents& grid, const std::vector<std::size_t>& pc, std::size_t p, F&& f)
{
    const std::size_t d = grid.size();
    const std::size_t nz = d == 3 ? p : 1;
    std::size_t local = 0;
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b)
            for (std::size_t c = 0; c < nz; ++c, ++local) {
                const std::size_t gi = pc[0] * p + a, gj = pc[1] * p + b;
                const std::size_t global = d == 3 ? (gi * grid[1] + gj) * grid[2] + pc[2] * p + c : gi * grid[1] + gj;
                f(local, global);
            }
}

} // namespace

std::size_t SubdomainLattice::patch_cells() const
{
    std::size_t n = 1;
    for (std::size_t a = 0; a < dims(); ++a) n *= p;
    return n;
}

Extents SubdomainLattice::grid_extents() const
{
    Extents e = lattice;
    for (auto& x : e) x *= p;
    return e;
}

std::size_t lattice_index(const Extents& lattice, const std::vector<std::size_t>& coords)
{
    if (coords.size() != lattice.size()) throw std::invalid_argument("lattice coordinate rank mismatch");
    std::size_t idx = 0;
    for (std::size_t a = 0; a < lattice.size(); ++a) {
        if (coords[a] >= lattice[a])
            throw std::out_of_range("lattice coordinates " + coords_str(coords) + " outside " + extents_str(lattice));
        idx = idx * lattice[a] + coords[a];
    }
    return idx;
}

std::vector<std::size_t> lattice_coords(const Extents& lattice, std::size_t index)
{
    std::vector<std::size_t> c(lattice.size());
    for (std::size_t a = lattice.size(); a-- > 0;) {
        c[a] = index % lattice[a];
        index /= lattice[a];
    }
    return c;
}

Extents lattice_extents(const Extents& grid, std::size_t p)
{
    if (p == 0) throw std::invalid_argument("patch extent must be positive");
    Extents n;
    for (std::size_t a = 0; a < grid.size(); ++a) {
        if (grid[a] % p != 0)
            throw std::invalid_argument("grid extent " + std::to_string(grid[a]) + " on axis " + std::to_string(a) +
                                        " is not divisible by patch extent " + std::to_string(p) + " (remainder " +
                                        std::to_string(grid[a] % p) + ")");
        n.push_back(grid[a] / p);
    }
    return n;
}

SubdomainLattice decompose(const Field& field, std::size_t p, std::string name, std::size_t timestep)
{
    SubdomainLattice lat;
    lat.p = p;
    lat.lattice = lattice_extents(field.extents, p);
    lat.field = std::move(name);
    lat.timestep = timestep;
    lat.patches.resize(lat.count());
    for (std::size_t n = 0; n < lat.count(); ++n) {
        auto& patch = lat.patches[n];
        patch.resize(lat.patch_cells());
        for_patch_cells(field.extents, lattice_coords(lat.lattice, n), p,
                        [&](std::size_t l, std::size_t g) { patch[l] = field.values[g]; });
    }
    return lat;
}

Field reassemble(const SubdomainLattice& lat)
{
    if (lat.patches.size() != lat.count())
        throw std::invalid_argument("lattice " + extents_str(lat.lattice) + " holds " +
                                    std::to_string(lat.patches.size()) + " patches, expected " +
                                    std::to_string(lat.count()));
    Field out(lat.grid_extents());
    for (std::size_t n = 0; n < lat.count(); ++n) {
        const auto coords = lattice_coords(lat.lattice, n);
        const auto& patch = lat.patches[n];
        if (patch.empty()) throw std::invalid_argument("missing patch at lattice coordinates " + coords_str(coords));
        if (patch.size() != lat.patch_cells())
            throw std::invalid_argument("patch at " + coords_str(coords) + " has " + std::to_string(patch.size()) +
                                        " cells, expected " + std::to_string(lat.patch_cells()));
        for_patch_cells(out.extents, coords, lat.p, [&](std::size_t l, std::size_t g) { out.values[g] = patch[l]; });
    }
    return out;
}

} // namespace cmls::decomp
