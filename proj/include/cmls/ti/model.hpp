#pragma once

#include "cmls/ae/autoencoder.hpp"
#include "cmls/decomp/neighbors.hpp"
#include "cmls/nn/layers.hpp"

#include <deque>
#include <filesystem>

namespace cmls::ti {

struct FieldSlot {
    std::string name;
    std::size_t latent = 0;
    bool operator==(const FieldSlot&) const = default;
};

/// Width algebra, for d spatial dims:
///   frame width     W   = sum l_s + sum l_c  (solution columns first)
///   F_spatial  in       = (2d + 1) W,  out d_gamma
///   F_temporal in       = th d_gamma,  out sum l_s
struct TiConfig {
    std::size_t dims = 2;
    std::vector<FieldSlot> solution;
    std::vector<FieldSlot> condition;
    std::size_t history = 10;  // th
    std::size_t d_gamma = 64;
    std::vector<std::size_t> spatial_hidden{128, 128};
    std::vector<std::size_t> temporal_hidden{128, 128};
    nn::Activation activation = nn::Activation::relu;
    decomp::NeighborPolicy policy;  // empty means zero on every axis
    bool residual = false;          // add the centre's latest solution latent to the output

    std::size_t solution_width() const;
    std::size_t condition_width() const;
    std::size_t frame_width() const { return solution_width() + condition_width(); }
    std::size_t stencil() const { return 2 * dims + 1; }
    std::size_t spatial_in() const { return stencil() * frame_width(); }
    std::size_t temporal_in() const { return history * d_gamma; }

    decomp::NeighborPolicy effective_policy() const;
    void validate() const;
    void to_metadata(io::Metadata& meta) const;
    static TiConfig from_metadata(const io::Metadata& meta);
    bool operator==(const TiConfig&) const = default;
};

/// Roster derived from autoencoders (one per field).
TiConfig roster_config(TiConfig base, const std::vector<const ae::AutoencoderModel*>& solution,
                       const std::vector<const ae::AutoencoderModel*>& condition);

class TimeIntegratorModel {
public:
    TimeIntegratorModel(TiConfig cfg, std::uint64_t seed);

    const TiConfig& config() const { return cfg_; }

    /// [M, spatial_in] -> [M, d_gamma]; throws naming expected and actual widths.
    nn::Var fuse_spatial(const nn::Var& x) const;
    std::vector<double> fuse_spatial(std::span<const double> x) const;
    /// [M, th * d_gamma] -> [M, sum l_s], without the residual term.
    nn::Var predict_next(const nn::Var& history) const;
    /// Oldest-first list of exactly th fused vectors.
    std::vector<double> predict_next(const std::vector<std::vector<double>>& gammas) const;

    /// Fused vectors of a stacked frame [R, W]; `table` comes from
    /// neighbour_table (offset per stacked lattice) and has R * (2d+1) entries.
    nn::Var gamma(const nn::Var& frame, const std::vector<long>& table) const;
    /// Next solution latents from th fused frames (oldest first) plus the
    /// latest solution latents [R, sum l_s] (used when residual is on).
    nn::Var advance(const std::vector<nn::Var>& gammas, const nn::Var& latest_solution) const;

    std::vector<long> table(const Extents& lattice) const;

    nn::Sequential& spatial() { return f_spatial_; }
    nn::Sequential& temporal() { return f_temporal_; }
    nn::ParameterRefs parameters();

    void save(const std::filesystem::path& path, const io::Metadata& extra = {}) const;
    static TimeIntegratorModel load(const std::filesystem::path& path, io::Metadata* metadata = nullptr);

private:
    TiConfig cfg_;
    nn::Sequential f_spatial_;
    nn::Sequential f_temporal_;
};

/// Table for B lattices stacked row-wise: lattice b occupies rows [bN, (b+1)N).
std::vector<long> stacked_table(const std::vector<long>& table, std::size_t n, std::size_t copies);

/// Joins per-field latent frames of one timestep into [N, W] (fields in roster order).
nn::Tensor combine(const std::vector<const ae::LatentFrame*>& fields);
/// Per-timestep combined frames from per-field sequences [field][t].
std::vector<nn::Tensor> combine_series(const std::vector<std::vector<ae::LatentFrame>>& fields);

/// Synchronous update of every subdomain from th combined frames [N, W]
/// (oldest first). `order` is the subdomain evaluation order (default
/// natural); the result is independent of it. Returns [N, sum l_s].
nn::Tensor step_all(const TimeIntegratorModel& model, const Extents& lattice, const std::vector<nn::Tensor>& history,
                    const std::vector<std::size_t>& order = {});

/// Rolling window of fused vectors so each frame is fused once.
class LatentStepper {
public:
    LatentStepper(const TimeIntegratorModel& model, Extents lattice);
    /// Appends a combined frame [N, W]; keeps the most recent th.
    void push(const nn::Tensor& frame);
    bool ready() const { return gammas_.size() == model_.config().history; }
    /// Solution latents for the next step, [N, sum l_s].
    nn::Tensor step() const;

private:
    const TimeIntegratorModel& model_;
    Extents lattice_;
    std::vector<long> table_;
    std::deque<nn::Var> gammas_;
    nn::Tensor latest_;
};

} // namespace cmls::ti
