#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cmls::pipeline {

/// Bad or inconsistent configuration; maps to exit code 1.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DataConfig {
    std::string path;  // existing dataset directory (with manifest.json); empty = generate into <out>/data
    std::string pde = "diffusion_reaction";  // diffusion_reaction | shallow_water | heat_laser
    std::vector<std::size_t> extents{32, 32};
    std::vector<double> lengths;  // empty = generator default
    double dt = 0.0;              // 0 = generator default
    std::size_t steps = 60;       // stored frames N_t
    std::size_t stride = 0;       // 0 = generator default
    std::size_t train = 20;
    std::size_t test = 5;
    bool augment = false;  // heat only: add the three mirrored / rotated copies of each training sample

    // diffusion-reaction
    double du = 1e-3, dv = 5e-3, k = 5e-3;
    // shallow water
    double g = 1.0, h_inside = 2.0, h_outside = 1.0;
    // heat with laser
    std::size_t passes = 4;
    double margin = 0.15, power = 1.0, radius = 0.1;
    double conductivity = 1.0, density = 1.0, heat_capacity = 1.0, initial_temperature = 0.0;
    // constant-in-time variant of any pde: every frame repeats frame `hold_frame`
    bool constant = false;
    std::size_t hold_frame = 0;

    bool operator==(const DataConfig&) const = default;
};

struct AeConfig {
    std::size_t patch = 8;      // p
    std::size_t latent = 16;    // l
    std::vector<std::size_t> channels{16, 32};
    std::size_t kernel = 3;
    std::string activation = "tanh";
    std::size_t epochs = 30;
    std::size_t batch = 64;
    double lr = 1e-3;
    double val_fraction = 0.1;
    std::size_t max_steps = 0;
    std::size_t plateau_patience = 5;

    bool operator==(const AeConfig&) const = default;
};

struct ScheduleConfig {
    std::size_t warmup = 10;
    std::size_t total = 110;
    double eps_min = 0.0;
    bool operator==(const ScheduleConfig&) const = default;
};

struct TiConfig {
    std::size_t history = 10;  // th
    std::size_t d_gamma = 64;
    std::vector<std::size_t> spatial_hidden{128, 128};
    std::vector<std::size_t> temporal_hidden{128, 128};
    std::string activation = "relu";
    std::string neighbors = "zero";  // one mode for every axis, or a comma list per axis
    bool residual = true;
    std::size_t unroll = 10;  // K
    ScheduleConfig schedule{};
    std::string loss = "latent";  // latent | decoded
    std::size_t epochs = 30;
    double lr = 1e-3;
    std::size_t batch = 8;
    std::size_t window_stride = 1;
    std::size_t windows_per_epoch = 0;
    double clip_norm = 1.0;
    double lr_decay = 1.0;
    std::size_t val_samples = 0;  // last training samples held out for free-running validation
    bool resume = false;

    bool operator==(const TiConfig&) const = default;
};

/// Frames [begin, end) of every training sample used by both trainers; end 0 = all.
struct WindowConfig {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const WindowConfig&) const = default;
};

struct RolloutConfig {
    std::size_t horizon = 0;                // T; 0 = N_t - th
    std::vector<std::string> boundary;      // per lattice axis: none | periodic | dirichlet
    std::vector<double> dirichlet;          // one raw boundary value per solution field
    std::vector<std::size_t> decode_steps;  // empty = all predicted frames
    bool pgm = true;                        // final-frame contour dump
    std::size_t pgm_z = 0;                  // slice for 3-D fields; 0 = top layer

    bool operator==(const RolloutConfig&) const = default;
};

struct EvalConfig {
    std::size_t t_begin = 0;  // 0 = th
    std::size_t t_end = 0;    // 0 = last rolled-out frame + 1
    std::optional<std::size_t> hold;  // persistence frame; default th - 1
    double melt_temperature = 0.0;    // heat only: > 0 adds melt-pool depth columns

    bool operator==(const EvalConfig&) const = default;
};

struct SweepConfig {
    std::string axis = "history";  // history | latent | train_end
    std::vector<std::size_t> values{5, 10, 20};
    bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    std::string out = "runs/experiment";
    std::string models;  // optional directory of another run whose ae/ and ti/ checkpoints are used
    DataConfig data{};
    AeConfig ae{};
    TiConfig ti{};
    WindowConfig train_window{};
    RolloutConfig rollout{};
    EvalConfig eval{};
    SweepConfig sweep{};

    /// All cross-field checks (width algebra, divisibility, windows). Throws ConfigError.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Unknown keys and wrong types are ConfigErrors; absent keys keep defaults.
ExperimentConfig from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& c, const std::filesystem::path& path);

} // namespace cmls::pipeline
