#pragma once

#include "cmls/datagen/grid.hpp"

#include <cstdint>
#include <optional>
#include <utility>

namespace cmls::datagen {

// ---- diffusion-reaction -----------------------------------------------------
//   u_t = D_u lap(u) + u - u^3 - k - v
//   v_t = D_v lap(v) + u - v
// explicit Euler, second-order central Laplacian, no-flux walls.

struct DiffusionReactionParams {
    double du = 1e-3;
    double dv = 5e-3;
    double k = 5e-3;

    void to_metadata(io::Metadata& meta) const;
};

/// max(D_u, D_v) * dt * sum_axis 1/dx^2; must not exceed 0.25.
double diffusion_reaction_cfl(const GridSpec& grid, const DiffusionReactionParams& p);

class DiffusionReactionSolver {
public:
    DiffusionReactionSolver(const GridSpec& grid, DiffusionReactionParams params);

    void set_state(Field u, Field v);
    void step();

    const Field& u() const { return u_; }
    const Field& v() const { return v_; }

private:
    GridSpec grid_;
    DiffusionReactionParams p_;
    Field u_, v_;
    Field lu_, lv_;
};

/// Standard-normal initial u and v per cell; returns {u, v}.
SeriesSet gen_diffusion_reaction(const GridSpec& grid, const DiffusionReactionParams& params, std::uint64_t seed);

// ---- shallow water, radial dam break ----------------------------------------
// (h, hu, hv) with gravity g, Lax-Friedrichs finite volumes, reflective walls.
// The domain is centred on the origin.

struct ShallowWaterParams {
    double g = 1.0;
    std::optional<double> dam_radius;  // drawn from U(0.3, 0.7) when absent
    double h_inside = 2.0;
    double h_outside = 1.0;

    void to_metadata(io::Metadata& meta) const;
};

class ShallowWaterSolver {
public:
    ShallowWaterSolver(const GridSpec& grid, double g);

    void set_state(Field h, Field hu, Field hv);
    /// Throws StabilityError if max(|u| + sqrt(g h)) dt / dx exceeds 1.
    void step();
    double cfl() const;
    double mass() const;

    const Field& h() const { return h_; }
    const Field& hu() const { return hu_; }
    const Field& hv() const { return hv_; }

private:
    GridSpec grid_;
    double g_;
    Field h_, hu_, hv_;
};

Field dam_break_height(const GridSpec& grid, const ShallowWaterParams& params, double radius);
double draw_dam_radius(std::uint64_t seed);

/// Returns {h}. The dam radius used is written to `params.dam_radius`.
SeriesSet gen_swe_dam_break(const GridSpec& grid, ShallowWaterParams& params, std::uint64_t seed);

// ---- heat equation with a moving laser ---------------------------------------
//   rho C T_t = k lap(T) + Q,  adiabatic walls, Q a Gaussian spot on the top
//   z-layer (largest z index) following a piecewise-linear path.

struct LaserWaypoint {
    std::size_t step = 0;  // solver step index
    double x = 0.0;
    double y = 0.0;
};

struct LaserPath {
    std::vector<LaserWaypoint> waypoints;
    double power = 1.0;   // Q0
    double radius = 1.0;  // sigma
    double conductivity = 1.0;
    double density = 1.0;
    double heat_capacity = 1.0;
    double initial_temperature = 0.0;

    double diffusivity() const { return conductivity / (density * heat_capacity); }
    /// Throws std::invalid_argument naming the offending segment if the path
    /// is not time-ordered or leaves [0, L_x] x [0, L_y]; also Q0 <= 0.
    void validate(const GridSpec& grid) const;
    std::pair<double, double> position(std::size_t step) const;

    void to_metadata(io::Metadata& meta) const;
};

/// Back-and-forth raster over the plate: `passes` lines parallel to x,
/// spaced evenly in y inside `margin`, covering `total_steps` solver steps.
LaserPath raster_path(const GridSpec& grid, std::size_t passes, double margin, std::size_t total_steps,
                      bool along_y = false);

double heat_stability_number(const GridSpec& grid, double diffusivity);

class HeatSolver {
public:
    HeatSolver(const GridSpec& grid, double conductivity, double density, double heat_capacity);

    void set_state(Field t);
    void step(const Field& source);
    double energy() const;  // sum T dV
    const Field& temperature() const { return t_; }

private:
    GridSpec grid_;
    double rho_c_;
    double alpha_;
    Field t_;
    Field lap_;
};

Field laser_source(const GridSpec& grid, const LaserPath& path, std::size_t step);

/// Returns {T (solution), Q (condition)}; frame n of Q is the source applied
/// during the step that leaves frame n.
SeriesSet gen_heat_laser(const GridSpec& grid, const LaserPath& path);

// ---- augmentation ------------------------------------------------------------

enum class AugmentOp { reflect_xz, reflect_yz, rotate90_z };

std::string to_string(AugmentOp op);

/// reflect_xz mirrors y, reflect_yz mirrors x, rotate90_z turns the (x, y)
/// plane by +90 degrees. Every series in the set is transformed.
SeriesSet augment(const SeriesSet& set, AugmentOp op);
/// {identity, reflect_xz, reflect_yz, rotate90_z} for each input sample.
std::vector<SeriesSet> augment_all(const std::vector<SeriesSet>& samples);

} // namespace cmls::datagen
