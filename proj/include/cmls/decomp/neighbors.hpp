#pragma once

#include "cmls/field.hpp"

#include <string>
#include <vector>

namespace cmls::decomp {

enum class NeighborMode { zero, replicate, periodic };

std::string to_string(NeighborMode mode);
NeighborMode parse_neighbor_mode(const std::string& text);

/// One mode per lattice axis.
struct NeighborPolicy {
    std::vector<NeighborMode> modes;

    static NeighborPolicy uniform(NeighborMode mode, std::size_t dims);
    std::string serialize() const;  // e.g. "zero,periodic"
    static NeighborPolicy parse(const std::string& text);
    bool operator==(const NeighborPolicy&) const = default;
};

/// Marks a neighbour outside the lattice under the zero policy.
inline constexpr long kZeroNeighbor = -1;

struct Neighborhood {
    long center = 0;
    std::vector<long> neighbors;  // [-x, +x, -y, +y(, -z, +z)]
};

Neighborhood neighbor_ids(const Extents& lattice, const std::vector<std::size_t>& coords, const NeighborPolicy& policy);

/// Flattened table, 2d+1 entries per subdomain: center first, then the
/// neighbours in neighbor_ids order.
std::vector<long> neighbor_table(const Extents& lattice, const NeighborPolicy& policy);

} // namespace cmls::decomp
