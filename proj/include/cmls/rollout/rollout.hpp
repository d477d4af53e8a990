#pragma once

#include "cmls/ae/autoencoder.hpp"
#include "cmls/errors.hpp"
#include "cmls/ti/model.hpp"

#include <filesystem>

namespace cmls::rollout {

enum class BoundaryKind { none, periodic, dirichlet };
std::string to_string(BoundaryKind k);
BoundaryKind parse_boundary(const std::string& text);

struct AxisDirective {
    BoundaryKind kind = BoundaryKind::none;
    std::vector<double> values;  // dirichlet: one boundary value per solution field
};

/// History is frames [0, th) of `initial`; predicted frames are th .. th+T-1.
struct RolloutPlan {
    SeriesSet initial;     // solution series, >= th frames
    SeriesSet conditions;  // condition series, >= th+T-1 frames when the model uses conditions
    std::size_t horizon = 0;                // T
    std::vector<AxisDirective> boundary;    // per lattice axis; empty = none
    std::vector<std::size_t> decode_steps;  // empty = every predicted frame
};

struct RolloutResult {
    std::vector<std::vector<ae::LatentFrame>> latents;  // [solution field][t], t in [0, th+T)
    SeriesSet series;  // solution fields, th+T frames: raw history, then decoded predictions
    std::vector<std::size_t> decoded;
    std::size_t decoder_calls_during_stepping = 0;
};

struct Models {
    std::vector<const ae::AutoencoderModel*> solution;
    std::vector<const ae::AutoencoderModel*> condition;
    const ti::TimeIntegratorModel* integrator = nullptr;
};

/// Checks every model/plan consistency rule; throws std::invalid_argument.
void validate_plan(const Models& models, const RolloutPlan& plan);

/// Throws NumericalError with the timestep of the first non-finite latent.
RolloutResult run(const Models& models, const RolloutPlan& plan);

/// First slab on `axis` takes the latents of the last slab.
ae::LatentFrame impose_periodic(const ae::LatentFrame& frame, std::size_t axis);
/// First and last slabs on `axis` set to eta0.
ae::LatentFrame impose_dirichlet(const ae::LatentFrame& frame, std::size_t axis, std::span<const double> eta0);
/// Latent of a patch filled with `value` (raw units).
std::vector<double> dirichlet_latent(const ae::AutoencoderModel& model, double value);

/// Grayscale P5 image of one z-slice (2-D fields ignore `z`), scaled into [lo, hi].
void write_pgm(const std::filesystem::path& path, const Field& f, std::size_t z, double lo, double hi);

} // namespace cmls::rollout
