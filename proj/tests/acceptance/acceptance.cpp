// Acceptance harness. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails. Pipeline criteria write under --workdir.

#include "cmls/ae/train.hpp"
#include "cmls/datagen/generators.hpp"
#include "cmls/decomp/lattice.hpp"
#include "cmls/errors.hpp"
#include "cmls/eval/metrics.hpp"
#include "cmls/nn/gradcheck.hpp"
#include "cmls/pipeline/pipeline.hpp"
#include "cmls/rollout/rollout.hpp"
#include "cmls/ti/train.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace cmls;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3)
{
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

nn::Tensor random_tensor(nn::Shape shape, nn::Rng& rng, double lo = -1.0, double hi = 1.0)
{
    nn::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

Field random_field(const Extents& e, std::mt19937_64& rng)
{
    std::normal_distribution<double> d;
    Field f(e);
    for (auto& v : f.values) v = d(rng);
    return f;
}

ae::LatentFrame random_latents(const Extents& lattice, std::size_t l, std::mt19937_64& rng)
{
    std::normal_distribution<double> d;
    ae::LatentFrame f{lattice, l, "u", 0, std::vector<double>(cell_count(lattice) * l)};
    for (auto& v : f.values) v = d(rng);
    return f;
}

std::vector<ti::EncodedSample> drifting_samples(std::size_t count, const Extents& lattice, std::size_t steps,
                                                std::size_t w, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<ti::EncodedSample> out;
    for (std::size_t s = 0; s < count; ++s) {
        ti::EncodedSample e;
        e.lattice = lattice;
        nn::Tensor base({cell_count(lattice), w});
        for (auto& v : base.values()) v = d(rng);
        for (std::size_t t = 0; t < steps; ++t) {
            nn::Tensor f = base;
            for (std::size_t i = 0; i < f.size(); ++i) f[i] = base[i] * std::cos(0.2 * double(t)) + 0.1 * double(i % 3);
            e.frames.push_back(f);
        }
        out.push_back(std::move(e));
    }
    return out;
}

// Weighted tanh sum so every output has its own sensitivity.
nn::Var probe_loss(const nn::Var& y)
{
    nn::Tensor w(y.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.37 * double(i) + 0.1);
    return nn::sum(nn::tanh(nn::add(y, nn::Var(w))));
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_oracle(const fs::path&)
{
    using namespace nn;
    Rng rng(101);
    struct Case {
        const char* name;
        LayerSpec spec;
        Shape input;
    };
    const Case cases[] = {
        {"dense", LayerSpec::dense(5, 4), {3, 5}},
        {"conv2d", LayerSpec::conv(2, 3, 3, 2, 2), {2, 2, 6, 6}},
        {"conv2d-s1", LayerSpec::conv(1, 2, 3, 1, 2), {2, 1, 5, 4}},
        {"conv3d", LayerSpec::conv(1, 2, 3, 2, 3), {1, 1, 4, 4, 4}},
        {"convT2d", LayerSpec::conv_transpose(3, 2, 3, 2, 2), {2, 3, 3, 3}},
        {"convT3d", LayerSpec::conv_transpose(2, 1, 3, 2, 3), {1, 2, 2, 2, 2}},
    };
    double worst = 0.0;
    std::string worst_name;
    auto note = [&](double e, const std::string& name) {
        if (!(e <= worst)) {
            worst = e;
            worst_name = name;
        }
    };
    for (const auto& c : cases) {
        Layer layer(c.name, c.spec, rng);
        std::size_t entries = 0;
        for (auto& p : layer.parameters()) {
            for (auto& v : p.mutable_value().values()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
            entries += p.value().size();
        }
        const Var x(random_tensor(c.input, rng));
        ParameterRefs refs;
        for (auto& p : layer.parameters()) refs.push_back(&p);
        note(grad_check(refs, [&] { return probe_loss(layer.forward(x)); }, {1e-5, entries, 3}), c.name);

        Parameter xp("x", x.value());
        ParameterRefs xr{&xp};
        note(grad_check(xr, [&] { return probe_loss(layer.forward(xp.var())); }, {1e-5, x.value().size(), 4}),
             std::string(c.name) + " input");
    }
    for (Activation a : {Activation::tanh, Activation::relu, Activation::identity}) {
        Layer layer("act", LayerSpec::act(a), rng);
        Tensor xv = random_tensor({3, 7}, rng);
        for (auto& v : xv.values())
            if (std::abs(v) < 1e-2) v = 0.5;  // keep relu off its kink
        Parameter xp("x", xv);
        ParameterRefs xr{&xp};
        note(grad_check(xr, [&] { return probe_loss(layer.forward(xp.var())); }, {1e-5, xv.size(), 5}),
             to_string(a));
    }

    // full K-step unrolled loss on a 2x2 lattice, l=2, th=2, K=2
    for (bool residual : {false, true}) {
        ti::TiConfig c;
        c.solution = {{"u", 2}};
        c.condition = {{"q", 1}};
        c.history = 2;
        c.d_gamma = 3;
        c.spatial_hidden = {5};
        c.temporal_hidden = {4};
        c.activation = Activation::tanh;
        c.residual = residual;
        ti::TimeIntegratorModel m(c, 11);
        const auto samples = drifting_samples(2, {2, 2}, 6, 3, 12);
        const std::vector<ti::Window> batch{{0, 0}, {1, 1}, {0, 2}};
        const std::vector<std::uint8_t> flags{0, 1, 0};
        std::size_t entries = 0;
        for (const auto* p : m.parameters()) entries += p->value().size();
        note(grad_check(m.parameters(), [&] { return ti::window_loss(m, samples, batch, flags, 2); },
                        {1e-5, entries, 1}),
             residual ? "ti loss (residual)" : "ti loss");
    }
    return {worst < 1e-4, "max rel err " + fmt(worst) + " (" + worst_name + ")"};
}

// ---- 2 ----------------------------------------------------------------------

Outcome decomposition_bijection(const fs::path&)
{
    std::mt19937_64 rng(202);
    std::size_t bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        for (const Extents& e : {Extents{64, 64}, Extents{16, 64, 64}}) {
            const Field f = random_field(e, rng);
            if (!(decomp::reassemble(decomp::decompose(f, 8)) == f)) ++bad;

            // other direction: a random lattice survives reassemble then decompose
            decomp::SubdomainLattice lat = decomp::decompose(Field(e), 8);
            for (auto& p : lat.patches)
                for (auto& v : p) v = std::normal_distribution<double>()(rng);
            const auto back = decomp::decompose(decomp::reassemble(lat), 8);
            if (back.lattice != lat.lattice || back.patches != lat.patches) ++bad;
        }
    }
    return {bad == 0, std::to_string(400 - bad) + "/400 round trips bit-exact"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome nrmse_oracle(const fs::path&)
{
    std::mt19937_64 rng(303);
    std::normal_distribution<double> d;
    std::vector<SeriesSet> gt(2);
    for (auto& set : gt)
        for (const char* name : {"u", "v"}) {
            FieldSeries s(name, FieldRole::solution, {8, 8}, 10);
            for (auto& v : s.values) v = float(d(rng));
            set.push_back(std::move(s));
        }
    auto doubled = gt;
    for (auto& set : doubled)
        for (auto& s : set)
            for (auto& v : s.values) v *= 2.0f;
    const double e0 = eval::nrmse(gt, gt, 3).aggregate;
    const double e1 = eval::nrmse(doubled, gt, 3).aggregate;

    std::vector<SeriesSet> g3(1);
    g3[0].push_back(FieldSeries("u", FieldRole::solution, {2, 1}, 3));
    for (std::size_t t = 0; t < 3; ++t) {
        g3[0][0].frame(t)[0] = 3.0f;
        g3[0][0].frame(t)[1] = 4.0f;
    }
    auto p3 = g3;
    p3[0][0].frame(1)[0] = 4.0f;  // error of size 1
    p3[0][0].frame(2)[1] = 6.0f;  // error of size 2
    const double e3 = eval::nrmse(p3, g3, 1).aggregate;

    const bool ok = std::abs(e0) < 1e-12 && std::abs(e1 - 1.0) < 1e-12 && std::abs(e3 - 0.3) < 1e-12;
    return {ok, "identical " + fmt(e0) + ", doubled " + fmt(e1, 15) + ", [3,4] fixture " + fmt(e3, 15)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome solver_audits(const fs::path&)
{
    using namespace datagen;
    // shallow water mass
    const GridSpec sg{{48, 48}, {5.0, 5.0}, 0.02, 4, 1};
    ShallowWaterParams sp;
    ShallowWaterSolver swe(sg, sp.g);
    swe.set_state(dam_break_height(sg, sp, draw_dam_radius(7)), Field(sg.extents), Field(sg.extents));
    const double m0 = swe.mass();
    double mass_err = 0.0;
    for (int n = 0; n < 200; ++n) {
        swe.step();
        mass_err = std::max(mass_err, std::abs(swe.mass() - m0) / m0);
    }
    const bool moved = swe.h().at(24, 24) < 1.9;

    // heat energy without a source
    const GridSpec hg{{8, 8, 4}, {1.0, 1.0, 0.5}, 1e-3, 2, 1};
    HeatSolver heat(hg, 1.0, 1.0, 1.0);
    std::mt19937_64 rng(404);
    heat.set_state(random_field(hg.extents, rng));
    const double e0 = heat.energy();
    const Field zero(hg.extents);
    for (int n = 0; n < 300; ++n) heat.step(zero);
    const double energy_err = std::abs(heat.energy() - e0) / std::abs(e0);

    // diffusion-reaction single step against a cellwise 3x3 oracle
    const GridSpec dg{{3, 3}, {1.5, 0.9}, 0.004, 2, 1};
    const DiffusionReactionParams p{0.02, 0.05, 5e-3};
    const Field u0 = random_field(dg.extents, rng), v0 = random_field(dg.extents, rng);
    DiffusionReactionSolver dr(dg, p);
    dr.set_state(u0, v0);
    dr.step();
    const double h[2] = {0.5, 0.3};
    auto lap = [&](const Field& f, long i, long j) {
        auto at = [&](long a, long b) { return f.at(std::size_t(std::clamp(a, 0L, 2L)), std::size_t(std::clamp(b, 0L, 2L))); };
        return (at(i - 1, j) - 2 * at(i, j) + at(i + 1, j)) / (h[0] * h[0]) +
               (at(i, j - 1) - 2 * at(i, j) + at(i, j + 1)) / (h[1] * h[1]);
    };
    double dr_err = 0.0;
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 3; ++j) {
            const double u = u0.at(i, j), v = v0.at(i, j);
            const double eu = u + dg.dt * (p.du * lap(u0, i, j) + u - u * u * u - p.k - v);
            const double ev = v + dg.dt * (p.dv * lap(v0, i, j) + u - v);
            dr_err = std::max({dr_err, std::abs(dr.u().at(i, j) - eu), std::abs(dr.v().at(i, j) - ev)});
        }
    const bool ok = mass_err < 1e-10 && moved && energy_err < 1e-10 && dr_err < 1e-12;
    return {ok, "swe mass " + fmt(mass_err) + ", heat energy " + fmt(energy_err) + ", dr step " + fmt(dr_err)};
}

// ---- 5 ----------------------------------------------------------------------

Outcome ae_capacity(const fs::path&)
{
    const datagen::GridSpec g{{32, 32}, {0.5, 0.5}, 0.005, 60, 10};
    const auto s = datagen::gen_diffusion_reaction(g, {}, 1);
    const auto stats = decomp::compute_stats(std::vector<const FieldSeries*>{&s[0]});
    const auto all = ae::collect_patches({&s[0]}, 8, stats);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < 32; ++i) rows.push_back(i * 29 % all.dim(0));
    const auto patches = ae::take_rows(all, rows);

    ae::AeTrainConfig c;
    c.epochs = 5000;
    c.batch = 32;
    c.max_steps = 5000;
    c.val_fraction = 0.0;
    c.plateau_patience = 200;
    ae::AutoencoderModel m({}, "u", stats, 1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = ae::train_autoencoder(m, patches, c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double rel = ae::reconstruction_error(m, patches).rel_l2;
    const bool ok = rel < 1e-2 && r.steps <= 5000 && secs < 300.0;
    return {ok, "rel L2 " + fmt(rel) + " after " + std::to_string(r.steps) + " steps, " + fmt(secs) + " s"};
}

// ---- pipeline helpers ---------------------------------------------------------

double cpu_seconds() { return double(std::clock()) / CLOCKS_PER_SEC; }

pipeline::ExperimentConfig desk_config(const fs::path& work)
{
    pipeline::ExperimentConfig c;
    c.name = "dr-desk";
    c.seed = 7;
    c.out = (work / "desk").string();
    c.data.pde = "diffusion_reaction";
    c.data.extents = {32, 32};
    c.data.steps = 60;
    c.data.train = 20;
    c.data.test = 5;
    c.ae.patch = 8;
    c.ae.latent = 16;
    c.ae.epochs = 10;
    c.ti.history = 10;
    c.ti.unroll = 10;
    c.ti.d_gamma = 64;
    c.ti.epochs = 40;
    c.ti.windows_per_epoch = 64;
    c.ti.batch = 8;
    c.ti.schedule = {10, 35, 0.0};
    return c;
}

bool all_finite(const std::vector<fs::path>& predictions)
{
    for (const auto& p : predictions)
        for (const auto& s : datagen::read_dataset(p).series)
            for (float v : s.values)
                if (!std::isfinite(v)) return false;
    return true;
}

// Model strictly below persistence on every sample.
std::size_t samples_won(const pipeline::EvalSummary& ev)
{
    std::size_t won = 0;
    for (std::size_t i = 0; i < ev.model.per_sample.size(); ++i)
        won += ev.model.per_sample[i] < ev.baseline.per_sample[i];
    return won;
}

std::string versus(const pipeline::EvalSummary& ev)
{
    return "nRMSE " + fmt(ev.model.aggregate) + " vs persistence " + fmt(ev.baseline.aggregate);
}

// Trains the desk models once; later criteria reuse them.
void ensure_desk(const fs::path& work)
{
    const auto c = desk_config(work);
    const pipeline::Layout lay(c);
    if (!fs::exists(lay.manifest())) pipeline::cmd_generate(c);
    if (!fs::exists(lay.ti_checkpoint(lay.ti_write))) {
        pipeline::cmd_train_ae(c);
        pipeline::cmd_train_ti(c);
    }
}

// ---- 6 ----------------------------------------------------------------------

Outcome constant_dynamics(const fs::path& work)
{
    pipeline::ExperimentConfig c;
    c.name = "constant";
    c.seed = 6;
    c.out = (work / "constant").string();
    fs::remove_all(c.out);
    c.data.pde = "shallow_water";
    c.data.extents = {64, 64};
    c.data.steps = 110;
    c.data.train = 8;
    c.data.test = 3;
    c.data.constant = true;
    c.data.hold_frame = 10;
    c.ae.epochs = 40;
    c.ti.history = 10;
    c.ti.unroll = 10;
    c.ti.epochs = 20;
    c.ti.windows_per_epoch = 64;
    c.ti.batch = 8;
    c.ti.schedule = {5, 15, 0.0};
    c.train_window = {0, 30};
    pipeline::cmd_generate(c);
    pipeline::cmd_train_ae(c);
    pipeline::cmd_train_ti(c);
    const auto r = pipeline::cmd_rollout(c);
    const auto ev = pipeline::cmd_eval(c);
    const bool ok = r.horizon == 100 && all_finite(r.predictions) && ev.model.aggregate < 1e-2;
    return {ok, std::to_string(r.horizon) + "-step rollout nRMSE " + fmt(ev.model.aggregate)};
}

// ---- 7 ----------------------------------------------------------------------

Outcome desk_scale(const fs::path& work)
{
    const auto c = desk_config(work);
    fs::remove_all(c.out);
    const double cpu0 = cpu_seconds();
    pipeline::cmd_generate(c);
    pipeline::cmd_train_ae(c);
    pipeline::cmd_train_ti(c);
    pipeline::cmd_rollout(c);
    const auto ev = pipeline::cmd_eval(c);
    const double cpu = cpu_seconds() - cpu0;
    const std::size_t won = samples_won(ev);
    const bool ok = ev.model.per_sample.size() == 5 && won == 5 && cpu <= 1800.0;
    return {ok, versus(ev) + ", below on " + std::to_string(won) + "/5 samples, " + fmt(cpu / 60.0) + " CPU min"};
}

// ---- 8 ----------------------------------------------------------------------

Outcome domain_transfer(const fs::path& work)
{
    ensure_desk(work);
    const auto desk = desk_config(work);
    pipeline::ExperimentConfig c;
    c.name = "dr-transfer";
    c.seed = 8;
    c.out = (work / "transfer").string();
    fs::remove_all(c.out);
    c.models = desk.out;
    c.data.pde = "diffusion_reaction";
    c.data.extents = {64, 64};
    c.data.steps = 60;
    c.data.train = 1;
    c.data.test = 5;
    c.rollout.horizon = 50;
    pipeline::cmd_generate(c);
    const auto r = pipeline::cmd_rollout(c);
    const auto ev = pipeline::cmd_eval(c);
    const bool finite = all_finite(r.predictions);
    const bool ok = r.horizon == 50 && finite && ev.model.aggregate < ev.baseline.aggregate;
    return {ok, "64x64, " + std::to_string(r.horizon) + " steps, " + (finite ? "finite, " : "non-finite, ") + versus(ev)};
}

// ---- 9 ----------------------------------------------------------------------

Outcome temporal_extrapolation(const fs::path& work)
{
    const auto desk = desk_config(work);
    if (!fs::exists(pipeline::Layout(desk).manifest())) pipeline::cmd_generate(desk);
    auto c = desk;
    c.name = "dr-extrapolate";
    c.out = (work / "extrapolate").string();
    fs::remove_all(c.out);
    c.data.path = pipeline::Layout(desk).data.string();
    c.train_window = {0, 40};
    c.eval.t_begin = 40;
    c.eval.t_end = 60;
    c.eval.hold = 9;
    pipeline::cmd_train_ae(c);
    pipeline::cmd_train_ti(c);
    const auto r = pipeline::cmd_rollout(c);
    const auto ev = pipeline::cmd_eval(c);
    const bool ok = all_finite(r.predictions) && std::isfinite(ev.model.aggregate) &&
                    ev.model.aggregate < ev.baseline.aggregate;
    return {ok, "trained on [0,40), scored on [40,60): " + versus(ev)};
}

// ---- 10 ---------------------------------------------------------------------

Outcome boundary_imposition(const fs::path&)
{
    std::mt19937_64 rng(1010);
    std::size_t checks = 0, bad = 0;
    auto expect = [&](bool c) {
        ++checks;
        bad += !c;
    };
    for (const Extents& lat : {Extents{4, 3}, Extents{3, 3, 2}}) {
        const std::size_t l = 4;
        ae::AutoencoderConfig ac;
        ac.dims = lat.size();
        ac.latent = l;
        ac.channels = {4, 4};
        const ae::AutoencoderModel model(ac, "u", {}, 17);
        const auto f = random_latents(lat, l, rng);
        std::vector<double> eta(l);
        for (auto& v : eta) v = std::normal_distribution<double>()(rng);

        for (std::size_t axis = 0; axis < lat.size(); ++axis) {
            const auto g = rollout::impose_periodic(f, axis);
            const auto decoded = model.decode(g);
            for (std::size_t n = 0; n < g.count(); ++n) {
                auto c = decomp::lattice_coords(lat, n);
                if (c[axis] == 0) {
                    c[axis] = lat[axis] - 1;
                    const std::size_t m = decomp::lattice_index(lat, c);
                    const auto a = g.vec(n), b = g.vec(m);
                    expect(std::equal(a.begin(), a.end(), b.begin(), b.end()));
                    expect(decoded.patches[n] == decoded.patches[m]);
                }
                else {
                    const auto a = g.vec(n), b = f.vec(n);
                    expect(std::equal(a.begin(), a.end(), b.begin(), b.end()));
                }
            }
            expect(rollout::impose_periodic(g, axis) == g);

            const auto h = rollout::impose_dirichlet(f, axis, eta);
            for (std::size_t n = 0; n < h.count(); ++n) {
                const auto c = decomp::lattice_coords(lat, n);
                const auto a = h.vec(n);
                if (c[axis] == 0 || c[axis] == lat[axis] - 1) expect(std::equal(a.begin(), a.end(), eta.begin(), eta.end()));
                else {
                    const auto b = f.vec(n);
                    expect(std::equal(a.begin(), a.end(), b.begin(), b.end()));
                }
            }
            expect(rollout::impose_dirichlet(h, axis, eta) == h);
        }
    }
    return {bad == 0, std::to_string(checks - bad) + "/" + std::to_string(checks) + " properties hold (2-D and 3-D)"};
}

// ---- 11 ---------------------------------------------------------------------

Outcome curriculum_determinism(const fs::path&)
{
    const ti::CurriculumSchedule s{10, 110, 0.0};
    const ti::CurriculumSchedule t{5, 25, 0.2};
    bool sched = s.probability(0) == 1.0 && s.probability(9) == 1.0 && s.probability(10) == 1.0 &&
                 s.probability(60) == 0.5 && s.probability(110) == 0.0 && s.probability(400) == 0.0 &&
                 t.probability(25) == 0.2;
    // interior epochs against the closed form
    for (std::size_t e = 10; e <= 110; ++e) sched &= std::abs(s.probability(e) - (1.0 - double(e - 10) / 100.0)) < 1e-15;

    const auto samples = drifting_samples(3, {3, 3}, 16, 4, 13);
    ti::TiTrainConfig cfg;
    cfg.epochs = 6;
    cfg.unroll = 3;
    cfg.batch = 2;
    cfg.seed = 99;
    cfg.lr = 3e-3;
    cfg.schedule = {1, 5, 0.0};
    ti::TiConfig mc;
    mc.solution = {{"u", 4}};
    mc.history = 3;
    mc.d_gamma = 8;
    mc.spatial_hidden = {16};
    mc.temporal_hidden = {16};
    ti::TimeIntegratorModel a(mc, 14), b(mc, 14);
    const auto ra = ti::train_ti(a, samples, cfg);
    const auto rb = ti::train_ti(b, samples, cfg);
    bool same = ra.decisions == rb.decisions && ra.windows == rb.windows && !ra.decisions.empty();
    const auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) same &= pa[i]->value() == pb[i]->value();
    const std::size_t gt = std::size_t(std::count(ra.decisions.begin(), ra.decisions.end(), 1));
    return {sched && same, std::string(sched ? "schedule exact" : "schedule mismatch") + ", " +
                               std::to_string(ra.decisions.size()) + " decisions (" + std::to_string(gt) +
                               " ground truth) " + (same ? "and weights identical" : "differ between runs")};
}

// ---- 12 ---------------------------------------------------------------------

Outcome synchronous_invariance(const fs::path&)
{
    std::mt19937_64 rng(1212);
    std::normal_distribution<double> d;
    const Extents lat{4, 4};
    std::size_t orders = 0, bad = 0;
    for (bool with_condition : {false, true}) {
        ti::TiConfig c;
        c.solution = {{"u", 4}};
        if (with_condition) c.condition = {{"q", 2}};
        c.history = 3;
        c.d_gamma = 8;
        c.spatial_hidden = {16};
        c.temporal_hidden = {16};
        ti::TimeIntegratorModel m(c, 12 + with_condition);
        for (auto* p : m.parameters())
            for (auto& v : p->mutable_value().values()) v = 0.5 * d(rng);
        std::vector<nn::Tensor> hist;
        for (std::size_t i = 0; i < 3; ++i) {
            nn::Tensor f({16, c.frame_width()});
            for (auto& v : f.values()) v = d(rng);
            hist.push_back(f);
        }
        const nn::Tensor ref = ti::step_all(m, lat, hist);
        std::vector<std::size_t> order(16);
        std::iota(order.begin(), order.end(), 0);
        std::reverse(order.begin(), order.end());
        bad += !(ti::step_all(m, lat, hist, order) == ref);
        ++orders;
        for (int k = 0; k < 5; ++k, ++orders) {
            std::shuffle(order.begin(), order.end(), rng);
            bad += !(ti::step_all(m, lat, hist, order) == ref);
        }
    }
    return {bad == 0, std::to_string(orders - bad) + "/" + std::to_string(orders) + " permuted orders bit-identical"};
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)(const fs::path&);
};

const Criterion kCriteria[] = {
    {1, "gradient oracle", gradient_oracle},
    {2, "decomposition bijection", decomposition_bijection},
    {3, "nrmse oracle", nrmse_oracle},
    {4, "solver audits", solver_audits},
    {5, "autoencoder capacity", ae_capacity},
    {6, "constant-dynamics rollout", constant_dynamics},
    {7, "desk-scale diffusion-reaction", desk_scale},
    {8, "domain-size transfer", domain_transfer},
    {9, "temporal extrapolation", temporal_extrapolation},
    {10, "boundary imposition", boundary_imposition},
    {11, "curriculum determinism", curriculum_determinism},
    {12, "synchronous-update invariance", synchronous_invariance},
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cmls acceptance criteria"};
    std::vector<int> only;
    std::string workdir = (fs::temp_directory_path() / "cmls_acceptance").string();
    bool verbose = false;
    app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 12));
    app.add_option("--workdir", workdir, "Scratch directory for pipeline runs");
    app.add_flag("--verbose,-v", verbose, "Show pipeline progress");
    CLI11_PARSE(app, argc, argv);

    if (!verbose) pipeline::set_log(nullptr);
    const std::set<int> selected(only.begin(), only.end());
    fs::create_directories(workdir);

    int failed = 0;
    for (const auto& c : kCriteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(workdir);
        }
        catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << "criterion " << std::setw(2) << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.name
                  << ": " << o.detail << " (" << std::fixed << std::setprecision(1) << secs << " s)"
                  << std::defaultfloat << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
