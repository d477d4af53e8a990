#pragma once

#include "cmls/datagen/grid.hpp"

#include <cstdint>
#include <filesystem>

namespace cmls::datagen {

inline constexpr char kDatasetMagic[] = "CMLD";
inline constexpr std::uint16_t kDatasetVersion = 1;

/// One sample on disk: grid, all field series, generator settings and seed.
struct Dataset {
    GridSpec grid;
    SeriesSet series;
    io::Metadata config;  // generator parameters (keys such as "pde", "pde.du")
    std::uint64_t seed = 0;
};

/// Header keys: grid.*, seed, field.count, field.<i>.{name,role,units},
/// gen.<key> for each config entry. Payload: each series in order, frame-major.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
/// Header only; cheap inspection of a file.
io::Metadata read_dataset_header(const std::filesystem::path& path);

} // namespace cmls::datagen
