#include "cmls/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cmls::rollout {

using nn::Tensor;

std::string to_string(BoundaryKind k)
{
    switch (k) {
    case BoundaryKind::none: return "none";
    case BoundaryKind::periodic: return "periodic";
    case BoundaryKind::dirichlet: return "dirichlet";
    }
    return "?";
}

BoundaryKind parse_boundary(const std::string& text)
{
    if (text == "none") return BoundaryKind::none;
    if (text == "periodic") return BoundaryKind::periodic;
    if (text == "dirichlet") return BoundaryKind::dirichlet;
    throw std::invalid_argument("unknown boundary directive '" + text + "' (expected none, periodic or dirichlet)");
}

namespace {

void check_axis(const ae::LatentFrame& f, std::size_t axis)
{
    if (axis >= f.lattice.size())
        throw std::invalid_argument("axis " + std::to_string(axis) + " outside a " + std::to_string(f.lattice.size()) +
                                    "-D lattice");
}

template <class Fn>
void for_slab(const Extents& lattice, std::size_t axis, std::size_t index, Fn&& fn)
{
    for (std::size_t n = 0; n < cell_count(lattice); ++n) {
        const auto c = decomp::lattice_coords(lattice, n);
        if (c[axis] == index) fn(n, c);
    }
}

} // namespace

ae::LatentFrame impose_periodic(const ae::LatentFrame& frame, std::size_t axis)
{
    check_axis(frame, axis);
    const std::size_t n = frame.lattice[axis];
    if (n < 2)
        throw std::invalid_argument("periodic imposition needs at least 2 subdomains on axis " + std::to_string(axis));
    ae::LatentFrame out = frame;
    for_slab(frame.lattice, axis, 0, [&](std::size_t id, std::vector<std::size_t> c) {
        c[axis] = n - 1;
        const auto src = frame.vec(decomp::lattice_index(frame.lattice, c));
        std::copy(src.begin(), src.end(), out.vec(id).begin());
    });
    return out;
}

ae::LatentFrame impose_dirichlet(const ae::LatentFrame& frame, std::size_t axis, std::span<const double> eta0)
{
    check_axis(frame, axis);
    if (eta0.size() != frame.latent)
        throw std::invalid_argument("dirichlet latent has " + std::to_string(eta0.size()) + " entries, frame latent is " +
                                    std::to_string(frame.latent));
    ae::LatentFrame out = frame;
    for (std::size_t slab : {std::size_t(0), frame.lattice[axis] - 1})
        for_slab(frame.lattice, axis, slab,
                 [&](std::size_t id, const std::vector<std::size_t>&) { std::copy(eta0.begin(), eta0.end(), out.vec(id).begin()); });
    return out;
}

std::vector<double> dirichlet_latent(const ae::AutoencoderModel& model, double value)
{
    Extents e(model.config().dims, model.config().patch);
    return model.encode_field(Field(e, value)).values;
}

void validate_plan(const Models& m, const RolloutPlan& plan)
{
    if (!m.integrator) throw std::invalid_argument("rollout: no time integrator given");
    const auto& cfg = m.integrator->config();
    if (plan.horizon < 1) throw std::invalid_argument("rollout: horizon T must be >= 1");
    if (m.solution.size() != cfg.solution.size() || m.condition.size() != cfg.condition.size())
        throw std::invalid_argument("rollout: integrator expects " + std::to_string(cfg.solution.size()) +
                                    " solution and " + std::to_string(cfg.condition.size()) +
                                    " condition autoencoders, got " + std::to_string(m.solution.size()) + " and " +
                                    std::to_string(m.condition.size()));
    auto check_roster = [&](const std::vector<const ae::AutoencoderModel*>& aes, const std::vector<ti::FieldSlot>& slots,
                            const SeriesSet& series, std::size_t min_frames, const char* what) {
        for (std::size_t i = 0; i < aes.size(); ++i) {
            if (aes[i]->field() != slots[i].name || aes[i]->config().latent != slots[i].latent)
                throw std::invalid_argument(std::string("rollout: ") + what + " autoencoder " + std::to_string(i) + " is '" +
                                            aes[i]->field() + "' (l=" + std::to_string(aes[i]->config().latent) +
                                            "), integrator expects '" + slots[i].name +
                                            "' (l=" + std::to_string(slots[i].latent) + ")");
            const auto it = std::find_if(series.begin(), series.end(),
                                         [&](const FieldSeries& s) { return s.name == slots[i].name; });
            if (it == series.end())
                throw std::invalid_argument(std::string("rollout: no ") + what + " series named '" + slots[i].name + "'");
            if (it->steps < min_frames)
                throw std::invalid_argument(std::string("rollout: ") + what + " series '" + it->name + "' has " +
                                            std::to_string(it->steps) + " frames, needs " + std::to_string(min_frames));
            decomp::lattice_extents(it->extents, aes[i]->config().patch);
            if (it->extents.size() != cfg.dims)
                throw std::invalid_argument("rollout: series '" + it->name + "' is not " + std::to_string(cfg.dims) + "-D");
        }
    };
    check_roster(m.solution, cfg.solution, plan.initial, cfg.history, "solution");
    check_roster(m.condition, cfg.condition, plan.conditions, cfg.history + plan.horizon - 1, "condition");

    const Extents& extents = find_series(plan.initial, cfg.solution[0].name).extents;
    for (const auto* group : {&plan.initial, &plan.conditions})
        for (const auto& s : *group)
            if (s.extents != extents)
                throw std::invalid_argument("rollout: series '" + s.name + "' has extents " + extents_str(s.extents) +
                                            ", expected " + extents_str(extents));
    const std::size_t p = m.solution[0]->config().patch;
    for (const auto* group : {&m.solution, &m.condition})
        for (const auto* a : *group)
            if (a->config().patch != p) throw std::invalid_argument("rollout: autoencoders use different patch extents");
    const Extents lattice = decomp::lattice_extents(extents, p);

    if (!plan.boundary.empty() && plan.boundary.size() != cfg.dims)
        throw std::invalid_argument("rollout: boundary directives given for " + std::to_string(plan.boundary.size()) +
                                    " axes, lattice has " + std::to_string(cfg.dims));
    for (std::size_t a = 0; a < plan.boundary.size(); ++a) {
        const auto& d = plan.boundary[a];
        if (d.kind == BoundaryKind::periodic && lattice[a] < 2)
            throw std::invalid_argument("rollout: periodic directive on axis " + std::to_string(a) +
                                        " needs at least 2 subdomains");
        if (d.kind == BoundaryKind::dirichlet && d.values.size() != m.solution.size())
            throw std::invalid_argument("rollout: dirichlet directive on axis " + std::to_string(a) + " needs " +
                                        std::to_string(m.solution.size()) + " boundary values");
    }
    for (auto t : plan.decode_steps)
        if (t < cfg.history || t >= cfg.history + plan.horizon)
            throw std::invalid_argument("rollout: decode step " + std::to_string(t) + " outside the predicted range [" +
                                        std::to_string(cfg.history) + ", " + std::to_string(cfg.history + plan.horizon) + ")");
}

RolloutResult run(const Models& m, const RolloutPlan& plan)
{
    validate_plan(m, plan);
    const auto& cfg = m.integrator->config();
    const std::size_t th = cfg.history, total = th + plan.horizon;
    const std::size_t ns = m.solution.size(), nc = m.condition.size();
    const Extents extents = find_series(plan.initial, cfg.solution[0].name).extents;
    const Extents lattice = decomp::lattice_extents(extents, m.solution[0]->config().patch);

    // Dirichlet latents per axis and field.
    std::vector<std::vector<std::vector<double>>> eta0(plan.boundary.size());
    for (std::size_t a = 0; a < plan.boundary.size(); ++a)
        if (plan.boundary[a].kind == BoundaryKind::dirichlet)
            for (std::size_t f = 0; f < ns; ++f) eta0[a].push_back(dirichlet_latent(*m.solution[f], plan.boundary[a].values[f]));

    RolloutResult res;
    res.latents.resize(ns);
    for (std::size_t f = 0; f < ns; ++f)
        res.latents[f] = ae::encode_series(*m.solution[f], find_series(plan.initial, cfg.solution[f].name), 0, th);

    auto condition_frame = [&](std::size_t t) {
        std::vector<ae::LatentFrame> out;
        for (std::size_t c = 0; c < nc; ++c)
            out.push_back(m.condition[c]->encode_field(find_series(plan.conditions, cfg.condition[c].name).field(t), t));
        return out;
    };
    auto combined = [&](std::size_t t, const std::vector<ae::LatentFrame>& conds) {
        std::vector<const ae::LatentFrame*> parts;
        for (std::size_t f = 0; f < ns; ++f) parts.push_back(&res.latents[f][t]);
        for (const auto& c : conds) parts.push_back(&c);
        return ti::combine(parts);
    };

    ti::LatentStepper stepper(*m.integrator, lattice);
    for (std::size_t t = 0; t < th; ++t) stepper.push(combined(t, condition_frame(t)));

    std::vector<std::size_t> before;
    for (const auto* a : m.solution) before.push_back(a->decode_calls());

    for (std::size_t t = th; t < total; ++t) {
        const Tensor next = stepper.step();
        if (!next.all_finite())
            throw NumericalError("rollout produced a non-finite latent at timestep " + std::to_string(t), t);
        std::size_t off = 0;
        for (std::size_t f = 0; f < ns; ++f) {
            const std::size_t l = cfg.solution[f].latent, w = next.dim(1);
            ae::LatentFrame fr{lattice, l, cfg.solution[f].name, t, std::vector<double>(cell_count(lattice) * l)};
            for (std::size_t i = 0; i < fr.count(); ++i) std::memcpy(fr.vec(i).data(), next.data() + i * w + off, l * sizeof(double));
            for (std::size_t a = 0; a < plan.boundary.size(); ++a) {
                if (plan.boundary[a].kind == BoundaryKind::periodic) fr = impose_periodic(fr, a);
                else if (plan.boundary[a].kind == BoundaryKind::dirichlet) fr = impose_dirichlet(fr, a, eta0[a][f]);
            }
            res.latents[f].push_back(std::move(fr));
            off += l;
        }
        if (t + 1 < total) stepper.push(combined(t, condition_frame(t)));
    }
    for (std::size_t f = 0; f < ns; ++f) res.decoder_calls_during_stepping += m.solution[f]->decode_calls() - before[f];

    res.decoded = plan.decode_steps;
    if (res.decoded.empty())
        for (std::size_t t = th; t < total; ++t) res.decoded.push_back(t);
    std::sort(res.decoded.begin(), res.decoded.end());
    res.decoded.erase(std::unique(res.decoded.begin(), res.decoded.end()), res.decoded.end());

    for (std::size_t f = 0; f < ns; ++f) {
        const auto& init = find_series(plan.initial, cfg.solution[f].name);
        FieldSeries out(init.name, FieldRole::solution, extents, total, init.units);
        for (std::size_t t = 0; t < th; ++t) out.set_frame(t, init.field(t));
        for (auto t : res.decoded) out.set_frame(t, m.solution[f]->decode_field(res.latents[f][t]));
        res.series.push_back(std::move(out));
    }
    return res;
}

void write_pgm(const std::filesystem::path& path, const Field& f, std::size_t z, double lo, double hi)
{
    const std::size_t nx = f.extents[0], ny = f.extents[1];
    if (f.dims() == 3 && z >= f.extents[2])
        throw std::invalid_argument("pgm slice z=" + std::to_string(z) + " outside extent " + std::to_string(f.extents[2]));
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    // rows are y (top = largest y), columns are x
    os << "P5\n" << nx << " " << ny << "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t j = ny; j-- > 0;)
        for (std::size_t i = 0; i < nx; ++i) {
            const double v = f.dims() == 3 ? f.at(i, j, z) : f.at(i, j);
            const double s = std::isfinite(v) ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0;
            os.put(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255.0))));
        }
}

} // namespace cmls::rollout
