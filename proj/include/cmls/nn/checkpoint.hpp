#pragma once

#include "cmls/io/container.hpp"
#include "cmls/nn/layers.hpp"

#include <filesystem>

namespace cmls::nn {

inline constexpr std::string_view kCheckpointMagic = "CMLS";
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    io::Metadata metadata;  // caller keys plus param.* layout keys
    std::vector<std::string> ids;
    std::vector<Tensor> values;
};

/// Parameters are stored in declaration order as float32; `metadata` keys
/// beginning with "param." are reserved.
void write_checkpoint(const std::filesystem::path& path, const io::Metadata& metadata, const ParameterRefs& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params`, checking ids and shapes.
void load_parameters(const Checkpoint& ckpt, const ParameterRefs& params);

// Specs of a Sequential under `prefix` ("<prefix>.input", "<prefix>.layers", "<prefix>.layer.<i>").
void put_sequential_specs(io::Metadata& meta, const std::string& prefix, const Sequential& seq);
std::vector<LayerSpec> get_sequential_specs(const io::Metadata& meta, const std::string& prefix);

} // namespace cmls::nn
