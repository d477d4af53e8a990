#pragma once

#include "cmls/field.hpp"

#include <string>
#include <vector>

namespace cmls::decomp {

/// A field cut into uniform p^d patches. Patches are stored row-major over the
/// lattice coordinates (i, j[, k]); each patch is itself row-major, last axis
/// fastest. An empty patch vector marks a missing patch.
struct SubdomainLattice {
    std::size_t p = 0;
    Extents lattice;  // n per axis
    std::string field;
    std::size_t timestep = 0;
    std::vector<std::vector<double>> patches;

    std::size_t dims() const { return lattice.size(); }
    std::size_t count() const { return cell_count(lattice); }
    std::size_t patch_cells() const;
    Extents grid_extents() const;
};

std::size_t lattice_index(const Extents& lattice, const std::vector<std::size_t>& coords);
std::vector<std::size_t> lattice_coords(const Extents& lattice, std::size_t index);

/// Throws std::invalid_argument stating extent, p and remainder for the first
/// axis that p does not divide.
Extents lattice_extents(const Extents& grid, std::size_t p);

SubdomainLattice decompose(const Field& field, std::size_t p, std::string name = {}, std::size_t timestep = 0);
/// Throws std::invalid_argument with the lattice coordinates of a missing patch.
Field reassemble(const SubdomainLattice& lattice);

} // namespace cmls::decomp
