#include "cmls/datagen/generators.hpp"

#include "stencil.hpp"

#include <cmath>
#include <sstream>

namespace cmls::datagen {

void LaserPath::validate(const GridSpec& grid) const
{
    if (waypoints.empty()) throw std::invalid_argument("laser path has no waypoints");
    if (!(power > 0.0)) throw std::invalid_argument("laser power Q0 must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("laser radius must be positive");
    if (!(conductivity > 0.0 && density > 0.0 && heat_capacity > 0.0))
        throw std::invalid_argument("material properties must be positive");
    const double lx = grid.lengths.at(0), ly = grid.lengths.at(1);
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        const auto& w = waypoints[i];
        if (w.x < 0.0 || w.x > lx || w.y < 0.0 || w.y > ly) {
            std::ostringstream os;
            os << "laser path leaves the plate at waypoint " << i << " (" << w.x << ", " << w.y << ")";
            if (i > 0) os << ", segment " << i - 1 << "->" << i;
            os << "; plate is [0, " << lx << "] x [0, " << ly << "]";
            throw std::invalid_argument(os.str());
        }
        if (i > 0 && w.step <= waypoints[i - 1].step) {
            std::ostringstream os;
            os << "laser path segment " << i - 1 << "->" << i << " is not time-ordered (step "
               << waypoints[i - 1].step << " then " << w.step << ")";
            throw std::invalid_argument(os.str());
        }
    }
}

std::pair<double, double> LaserPath::position(std::size_t step) const
{
    if (waypoints.empty()) throw std::invalid_argument("laser path has no waypoints");
    if (step <= waypoints.front().step) return {waypoints.front().x, waypoints.front().y};
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const auto& a = waypoints[i - 1];
        const auto& b = waypoints[i];
        if (step <= b.step) {
            const double s = double(step - a.step) / double(b.step - a.step);
            return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
        }
    }
    return {waypoints.back().x, waypoints.back().y};
}

void LaserPath::to_metadata(io::Metadata& meta) const
{
    meta["pde"] = "heat_laser";
    meta["pde.power"] = io::format_double(power);
    meta["pde.radius"] = io::format_double(radius);
    meta["pde.conductivity"] = io::format_double(conductivity);
    meta["pde.density"] = io::format_double(density);
    meta["pde.heat_capacity"] = io::format_double(heat_capacity);
    meta["pde.initial_temperature"] = io::format_double(initial_temperature);
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < waypoints.size(); ++i)
        os << (i ? ";" : "") << waypoints[i].step << ":" << waypoints[i].x << ":" << waypoints[i].y;
    meta["pde.path"] = os.str();
}

LaserPath raster_path(const GridSpec& grid, std::size_t passes, double margin, std::size_t total_steps, bool along_y)
{
    if (passes == 0) throw std::invalid_argument("raster path needs at least one pass");
    if (total_steps == 0) throw std::invalid_argument("raster path needs a positive duration");
    const double lx = grid.lengths.at(0), ly = grid.lengths.at(1);
    if (margin < 0.0 || 2.0 * margin >= std::min(lx, ly))
        throw std::invalid_argument("raster margin leaves no room on the plate");

    // Along-track coordinate a, cross-track coordinate c.
    const double la = along_y ? ly : lx, lc = along_y ? lx : ly;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t p = 0; p < passes; ++p) {
        const double c = passes == 1 ? 0.5 * lc : margin + (lc - 2.0 * margin) * double(p) / double(passes - 1);
        const double a0 = p % 2 == 0 ? margin : la - margin;
        const double a1 = p % 2 == 0 ? la - margin : margin;
        pts.emplace_back(a0, c);
        pts.emplace_back(a1, c);
    }
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < pts.size(); ++i)
        cum.push_back(cum.back() + std::hypot(pts[i].first - pts[i - 1].first, pts[i].second - pts[i - 1].second));

    LaserPath path;
    std::size_t last = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t step = std::size_t(std::llround(cum[i] / cum.back() * double(total_steps)));
        if (i > 0 && step <= last) step = last + 1;
        last = step;
        const auto [a, c] = pts[i];
        path.waypoints.push_back(along_y ? LaserWaypoint{step, c, a} : LaserWaypoint{step, a, c});
    }
    return path;
}

double heat_stability_number(const GridSpec& grid, double diffusivity)
{
    double s = 0.0;
    for (std::size_t a = 0; a < grid.dims(); ++a) s += 1.0 / (grid.spacing(a) * grid.spacing(a));
    return diffusivity * grid.dt * s;
}

HeatSolver::HeatSolver(const GridSpec& grid, double conductivity, double density, double heat_capacity)
    : grid_(grid), rho_c_(density * heat_capacity), alpha_(conductivity / (density * heat_capacity)),
      t_(grid.extents), lap_(grid.extents)
{
    if (!(conductivity > 0.0 && rho_c_ > 0.0)) throw std::invalid_argument("heat: material properties must be positive");
    const double number = heat_stability_number(grid_, alpha_);
    if (number > 0.5) {
        std::ostringstream os;
        os << "heat: explicit stability number " << number << " exceeds 0.5";
        throw StabilityError(os.str(), number, 0.5);
    }
}

void HeatSolver::set_state(Field t)
{
    if (t.extents != grid_.extents) throw std::invalid_argument("heat: state extents do not match the grid");
    t_ = std::move(t);
}

void HeatSolver::step(const Field& source)
{
    if (source.extents != grid_.extents) throw std::invalid_argument("heat: source extents do not match the grid");
    std::vector<double> inv_h2;
    for (std::size_t a = 0; a < grid_.dims(); ++a) inv_h2.push_back(1.0 / (grid_.spacing(a) * grid_.spacing(a)));
    detail::neumann_laplacian(t_, inv_h2, lap_);
    const double dt = grid_.dt;
    for (std::size_t i = 0; i < t_.values.size(); ++i)
        t_.values[i] += dt * (alpha_ * lap_.values[i] + source.values[i] / rho_c_);
}

double HeatSolver::energy() const
{
    double e = 0.0;
    for (double x : t_.values) e += x;
    return e * grid_.cell_volume();
}

Field laser_source(const GridSpec& grid, const LaserPath& path, std::size_t step)
{
    Field q(grid.extents);
    const auto [cx, cy] = path.position(step);
    const double dx = grid.spacing(0), dy = grid.spacing(1);
    const double inv = 1.0 / (2.0 * path.radius * path.radius);
    const bool three_d = grid.dims() == 3;
    const std::size_t top = three_d ? grid.extents[2] - 1 : 0;
    for (std::size_t i = 0; i < grid.extents[0]; ++i)
        for (std::size_t j = 0; j < grid.extents[1]; ++j) {
            const double x = (double(i) + 0.5) * dx - cx;
            const double y = (double(j) + 0.5) * dy - cy;
            q.at(i, j, top) = path.power * std::exp(-(x * x + y * y) * inv);
        }
    return q;
}

SeriesSet gen_heat_laser(const GridSpec& grid, const LaserPath& path)
{
    grid.validate();
    path.validate(grid);
    HeatSolver solver(grid, path.conductivity, path.density, path.heat_capacity);
    solver.set_state(Field(grid.extents, path.initial_temperature));

    SeriesSet out{FieldSeries("T", FieldRole::solution, grid.extents, grid.steps),
                  FieldSeries("Q", FieldRole::condition, grid.extents, grid.steps)};
    std::size_t n = 0;
    for (std::size_t t = 0; t < grid.steps; ++t) {
        out[0].set_frame(t, solver.temperature());
        out[1].set_frame(t, laser_source(grid, path, n));
        if (t + 1 < grid.steps)
            for (std::size_t s = 0; s < grid.stride; ++s, ++n) solver.step(laser_source(grid, path, n));
    }
    if (!out[0].all_finite()) throw std::domain_error("heat: non-finite values produced");
    return out;
}

} // namespace cmls::datagen
