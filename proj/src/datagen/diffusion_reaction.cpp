#include "cmls/datagen/generators.hpp"

#include "stencil.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace cmls::datagen {

namespace {

std::vector<double> inverse_spacing_squared(const GridSpec& grid)
{
    std::vector<double> out;
    for (std::size_t a = 0; a < grid.dims(); ++a) out.push_back(1.0 / (grid.spacing(a) * grid.spacing(a)));
    return out;
}

double sum_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

} // namespace

void DiffusionReactionParams::to_metadata(io::Metadata& meta) const
{
    meta["pde"] = "diffusion_reaction";
    meta["pde.du"] = io::format_double(du);
    meta["pde.dv"] = io::format_double(dv);
    meta["pde.k"] = io::format_double(k);
}

double diffusion_reaction_cfl(const GridSpec& grid, const DiffusionReactionParams& p)
{
    return std::max(p.du, p.dv) * grid.dt * sum_of(inverse_spacing_squared(grid));
}

DiffusionReactionSolver::DiffusionReactionSolver(const GridSpec& grid, DiffusionReactionParams params)
    : grid_(grid), p_(params), u_(grid.extents), v_(grid.extents), lu_(grid.extents), lv_(grid.extents)
{
    if (!(grid_.dt > 0.0)) throw std::invalid_argument("diffusion-reaction: dt must be positive");
    const double cfl = diffusion_reaction_cfl(grid_, p_);
    if (cfl > 0.25) {
        std::ostringstream os;
        os << "diffusion-reaction: explicit stability number " << cfl << " exceeds 0.25";
        throw StabilityError(os.str(), cfl, 0.25);
    }
}

void DiffusionReactionSolver::set_state(Field u, Field v)
{
    if (u.extents != grid_.extents || v.extents != grid_.extents)
        throw std::invalid_argument("diffusion-reaction: state extents do not match the grid");
    u_ = std::move(u);
    v_ = std::move(v);
}

void DiffusionReactionSolver::step()
{
    const auto inv_h2 = inverse_spacing_squared(grid_);
    detail::neumann_laplacian(u_, inv_h2, lu_);
    detail::neumann_laplacian(v_, inv_h2, lv_);
    const double dt = grid_.dt;
    for (std::size_t i = 0; i < u_.values.size(); ++i) {
        const double u = u_.values[i];
        const double v = v_.values[i];
        const double ru = u - u * u * u - p_.k - v;
        const double rv = u - v;
        u_.values[i] = u + dt * (p_.du * lu_.values[i] + ru);
        v_.values[i] = v + dt * (p_.dv * lv_.values[i] + rv);
    }
}

SeriesSet gen_diffusion_reaction(const GridSpec& grid, const DiffusionReactionParams& params, std::uint64_t seed)
{
    grid.validate();
    DiffusionReactionSolver solver(grid, params);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Field u(grid.extents), v(grid.extents);
    for (auto& x : u.values) x = normal(rng);
    for (auto& x : v.values) x = normal(rng);
    solver.set_state(std::move(u), std::move(v));

    SeriesSet out{FieldSeries("u", FieldRole::solution, grid.extents, grid.steps),
                  FieldSeries("v", FieldRole::solution, grid.extents, grid.steps)};
    for (std::size_t t = 0; t < grid.steps; ++t) {
        if (t > 0)
            for (std::size_t s = 0; s < grid.stride; ++s) solver.step();
        out[0].set_frame(t, solver.u());
        out[1].set_frame(t, solver.v());
    }
    if (!out[0].all_finite() || !out[1].all_finite())
        throw std::domain_error("diffusion-reaction: non-finite values produced");
    return out;
}

} // namespace cmls::datagen
