#include "cmls/decomp/neighbors.hpp"

#include "cmls/decomp/lattice.hpp"

#include <stdexcept>

namespace cmls::decomp {

std::string to_string(NeighborMode mode)
{
    switch (mode) {
    case NeighborMode::zero: return "zero";
    case NeighborMode::replicate: return "replicate";
    case NeighborMode::periodic: return "periodic";
    }
    return "?";
}

NeighborMode parse_neighbor_mode(const std::string& text)
{
    if (text == "zero") return NeighborMode::zero;
    if (text == "replicate") return NeighborMode::replicate;
    if (text == "periodic") return NeighborMode::periodic;
    throw std::invalid_argument("unknown neighbour policy '" + text + "' (expected zero, replicate or periodic)");
}

NeighborPolicy NeighborPolicy::uniform(NeighborMode mode, std::size_t dims)
{
    return NeighborPolicy{std::vector<NeighborMode>(dims, mode)};
}

std::string NeighborPolicy::serialize() const
{
    std::string s;
    for (std::size_t i = 0; i < modes.size(); ++i) s += (i ? "," : "") + to_string(modes[i]);
    return s;
}

NeighborPolicy NeighborPolicy::parse(const std::string& text)
{
    NeighborPolicy p;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        p.modes.push_back(parse_neighbor_mode(text.substr(pos, end - pos)));
        pos = end + 1;
    }
    return p;
}

Neighborhood neighbor_ids(const Extents& lattice, const std::vector<std::size_t>& coords, const NeighborPolicy& policy)
{
    const std::size_t d = lattice.size();
    if (policy.modes.size() != d)
        throw std::invalid_argument("neighbour policy has " + std::to_string(policy.modes.size()) +
                                    " axes, lattice has " + std::to_string(d));
    Neighborhood out;
    out.center = long(lattice_index(lattice, coords));
    for (std::size_t a = 0; a < d; ++a)
        for (int dir : {-1, 1}) {
            const long n = long(lattice[a]);
            long c = long(coords[a]) + dir;
            if (c >= 0 && c < n) {
                auto nc = coords;
                nc[a] = std::size_t(c);
                out.neighbors.push_back(long(lattice_index(lattice, nc)));
                continue;
            }
            switch (policy.modes[a]) {
            case NeighborMode::zero: out.neighbors.push_back(kZeroNeighbor); break;
            case NeighborMode::replicate: out.neighbors.push_back(out.center); break;
            case NeighborMode::periodic: {
                auto nc = coords;
                nc[a] = std::size_t((c + n) % n);
                out.neighbors.push_back(long(lattice_index(lattice, nc)));
                break;
            }
            }
        }
    return out;
}

std::vector<long> neighbor_table(const Extents& lattice, const NeighborPolicy& policy)
{
    std::vector<long> table;
    const std::size_t n = cell_count(lattice);
    table.reserve(n * (2 * lattice.size() + 1));
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = neighbor_ids(lattice, lattice_coords(lattice, i), policy);
        table.push_back(nb.center);
        table.insert(table.end(), nb.neighbors.begin(), nb.neighbors.end());
    }
    return table;
}

} // namespace cmls::decomp
