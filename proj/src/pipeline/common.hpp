#pragma once

#include "cmls/pipeline/pipeline.hpp"

#include <chrono>
#include <memory>

namespace cmls::pipeline::detail {

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

inline constexpr std::uint64_t kAeSeedTag = 10;
inline constexpr std::uint64_t kTiSeedTag = 20;

/// Autoencoders in manifest field order, split by role.
struct AeSet {
    std::vector<std::unique_ptr<ae::AutoencoderModel>> solution, condition;
    std::vector<const ae::AutoencoderModel*> solution_ptrs() const;
    std::vector<const ae::AutoencoderModel*> condition_ptrs() const;
};

/// Throws ConfigError naming the missing checkpoint and the command to run.
AeSet load_autoencoders(const Layout& layout, const Manifest& m);

ti::TiConfig integrator_config(const ExperimentConfig& cfg, const Manifest& m, const AeSet& aes);

std::vector<const FieldSeries*> series_of(const std::vector<datagen::Dataset>& sets, const std::string& field);

} // namespace cmls::pipeline::detail
