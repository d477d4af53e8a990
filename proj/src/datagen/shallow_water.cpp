#include "cmls/datagen/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cmls::datagen {

namespace {

struct State {
    double h, hu, hv;
};

// Physical flux along x (hu-normal) or y (hv-normal).
State flux(const State& s, double g, bool along_x)
{
    const double u = s.hu / s.h;
    const double v = s.hv / s.h;
    const double p = 0.5 * g * s.h * s.h;
    if (along_x) return {s.hu, s.hu * u + p, s.hu * v};
    return {s.hv, s.hv * u, s.hv * v + p};
}

// Lax-Friedrichs face flux; `c` multiplies the state jump.
State face_flux(const State& l, const State& r, double g, bool along_x, double c)
{
    const State fl = flux(l, g, along_x);
    const State fr = flux(r, g, along_x);
    return {0.5 * (fl.h + fr.h) - c * (r.h - l.h), 0.5 * (fl.hu + fr.hu) - c * (r.hu - l.hu),
            0.5 * (fl.hv + fr.hv) - c * (r.hv - l.hv)};
}

State mirror(const State& s, bool along_x)
{
    return along_x ? State{s.h, -s.hu, s.hv} : State{s.h, s.hu, -s.hv};
}

} // namespace

void ShallowWaterParams::to_metadata(io::Metadata& meta) const
{
    meta["pde"] = "shallow_water";
    meta["pde.g"] = io::format_double(g);
    meta["pde.scheme"] = "lax_friedrichs";
    meta["pde.boundary"] = "reflective";
    meta["pde.h_inside"] = io::format_double(h_inside);
    meta["pde.h_outside"] = io::format_double(h_outside);
    if (dam_radius) meta["pde.dam_radius"] = io::format_double(*dam_radius);
}

ShallowWaterSolver::ShallowWaterSolver(const GridSpec& grid, double g)
    : grid_(grid), g_(g), h_(grid.extents, 1.0), hu_(grid.extents), hv_(grid.extents)
{
    if (grid_.dims() != 2) throw std::invalid_argument("shallow water: 2-D grids only");
    if (!(g_ > 0.0) || !(grid_.dt > 0.0)) throw std::invalid_argument("shallow water: g and dt must be positive");
}

void ShallowWaterSolver::set_state(Field h, Field hu, Field hv)
{
    if (h.extents != grid_.extents || hu.extents != grid_.extents || hv.extents != grid_.extents)
        throw std::invalid_argument("shallow water: state extents do not match the grid");
    for (double x : h.values)
        if (!(x > 0.0)) throw std::invalid_argument("shallow water: depth must be positive");
    h_ = std::move(h);
    hu_ = std::move(hu);
    hv_ = std::move(hv);
}

double ShallowWaterSolver::cfl() const
{
    const double dmin = std::min(grid_.spacing(0), grid_.spacing(1));
    double speed = 0.0;
    for (std::size_t i = 0; i < h_.values.size(); ++i) {
        const double h = h_.values[i];
        const double c = std::sqrt(g_ * h);
        speed = std::max({speed, std::abs(hu_.values[i] / h) + c, std::abs(hv_.values[i] / h) + c});
    }
    return speed * grid_.dt / dmin;
}

double ShallowWaterSolver::mass() const
{
    double m = 0.0;
    for (double h : h_.values) m += h;
    return m * grid_.cell_volume();
}

void ShallowWaterSolver::step()
{
    const double number = cfl();
    if (number > 1.0) {
        std::ostringstream os;
        os << "shallow water: CFL number " << number << " exceeds 1";
        throw StabilityError(os.str(), number, 1.0);
    }
    const std::size_t nx = grid_.extents[0], ny = grid_.extents[1];
    const double dx = grid_.spacing(0), dy = grid_.spacing(1), dt = grid_.dt;
    // 1/4 per axis reproduces the classical four-neighbour Lax-Friedrichs average.
    const double cx = dx / (4.0 * dt), cy = dy / (4.0 * dt);
    auto at = [&](std::size_t i, std::size_t j) {
        const std::size_t k = i * ny + j;
        return State{h_.values[k], hu_.values[k], hv_.values[k]};
    };

    // fx[i][j]: face between cells (i-1, j) and (i, j), i in [0, nx].
    std::vector<State> fx((nx + 1) * ny), fy(nx * (ny + 1));
    for (std::size_t i = 0; i <= nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const State l = i > 0 ? at(i - 1, j) : mirror(at(0, j), true);
            const State r = i < nx ? at(i, j) : mirror(at(nx - 1, j), true);
            fx[i * ny + j] = face_flux(l, r, g_, true, cx);
        }
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j <= ny; ++j) {
            const State l = j > 0 ? at(i, j - 1) : mirror(at(i, 0), false);
            const State r = j < ny ? at(i, j) : mirror(at(i, ny - 1), false);
            fy[i * (ny + 1) + j] = face_flux(l, r, g_, false, cy);
        }
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t k = i * ny + j;
            const State& xe = fx[(i + 1) * ny + j];
            const State& xw = fx[i * ny + j];
            const State& yn = fy[i * (ny + 1) + j + 1];
            const State& ys = fy[i * (ny + 1) + j];
            h_.values[k] -= dt / dx * (xe.h - xw.h) + dt / dy * (yn.h - ys.h);
            hu_.values[k] -= dt / dx * (xe.hu - xw.hu) + dt / dy * (yn.hu - ys.hu);
            hv_.values[k] -= dt / dx * (xe.hv - xw.hv) + dt / dy * (yn.hv - ys.hv);
        }
}

Field dam_break_height(const GridSpec& grid, const ShallowWaterParams& params, double radius)
{
    Field h(grid.extents, params.h_outside);
    const double dx = grid.spacing(0), dy = grid.spacing(1);
    for (std::size_t i = 0; i < grid.extents[0]; ++i)
        for (std::size_t j = 0; j < grid.extents[1]; ++j) {
            const double x = -0.5 * grid.lengths[0] + (double(i) + 0.5) * dx;
            const double y = -0.5 * grid.lengths[1] + (double(j) + 0.5) * dy;
            if (std::hypot(x, y) < radius) h.at(i, j) = params.h_inside;
        }
    return h;
}

double draw_dam_radius(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return std::uniform_real_distribution<double>(0.3, 0.7)(rng);
}

SeriesSet gen_swe_dam_break(const GridSpec& grid, ShallowWaterParams& params, std::uint64_t seed)
{
    grid.validate();
    if (grid.dims() != 2) throw std::invalid_argument("shallow water: 2-D grids only");
    const double radius = params.dam_radius ? *params.dam_radius : draw_dam_radius(seed);
    const double limit = 0.5 * std::min(grid.lengths[0], grid.lengths[1]);
    if (!(radius > 0.0 && radius < limit))
        throw std::invalid_argument("shallow water: dam radius " + std::to_string(radius) + " outside (0, " +
                                    std::to_string(limit) + ")");
    params.dam_radius = radius;

    ShallowWaterSolver solver(grid, params.g);
    solver.set_state(dam_break_height(grid, params, radius), Field(grid.extents), Field(grid.extents));
    if (solver.cfl() > 1.0) {
        std::ostringstream os;
        os << "shallow water: initial CFL number " << solver.cfl() << " exceeds 1";
        throw StabilityError(os.str(), solver.cfl(), 1.0);
    }

    SeriesSet out{FieldSeries("h", FieldRole::solution, grid.extents, grid.steps)};
    for (std::size_t t = 0; t < grid.steps; ++t) {
        if (t > 0)
            for (std::size_t s = 0; s < grid.stride; ++s) solver.step();
        out[0].set_frame(t, solver.h());
    }
    if (!out[0].all_finite()) throw std::domain_error("shallow water: non-finite values produced");
    return out;
}

} // namespace cmls::datagen
