#include "cmls/pipeline/config.hpp"

#include "cmls/decomp/neighbors.hpp"
#include "cmls/nn/layers.hpp"
#include "cmls/rollout/rollout.hpp"
#include "cmls/ti/train.hpp"

#include <fstream>
#include <set>

namespace cmls::pipeline {

using nlohmann::json;

namespace {

// Reads the members of one JSON object, remembering which keys were used so
// that typos surface as errors instead of silently keeping defaults.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        used_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        try {
            out = it->template get<T>();
        }
        catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out)
    {
        T v{};
        used_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        get(key, v);
        out = v;
    }

    const json* child(const char* key)
    {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

void fail(const std::string& what) { throw ConfigError(what); }

} // namespace

json to_json(const ExperimentConfig& c)
{
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["models"] = c.models;
    const auto& d = c.data;
    j["data"] = {{"path", d.path},
                 {"pde", d.pde},
                 {"extents", d.extents},
                 {"lengths", d.lengths},
                 {"dt", d.dt},
                 {"steps", d.steps},
                 {"stride", d.stride},
                 {"train", d.train},
                 {"test", d.test},
                 {"augment", d.augment},
                 {"du", d.du},
                 {"dv", d.dv},
                 {"k", d.k},
                 {"g", d.g},
                 {"h_inside", d.h_inside},
                 {"h_outside", d.h_outside},
                 {"passes", d.passes},
                 {"margin", d.margin},
                 {"power", d.power},
                 {"radius", d.radius},
                 {"conductivity", d.conductivity},
                 {"density", d.density},
                 {"heat_capacity", d.heat_capacity},
                 {"initial_temperature", d.initial_temperature},
                 {"constant", d.constant},
                 {"hold_frame", d.hold_frame}};
    const auto& a = c.ae;
    j["ae"] = {{"patch", a.patch},
               {"latent", a.latent},
               {"channels", a.channels},
               {"kernel", a.kernel},
               {"activation", a.activation},
               {"epochs", a.epochs},
               {"batch", a.batch},
               {"lr", a.lr},
               {"val_fraction", a.val_fraction},
               {"max_steps", a.max_steps},
               {"plateau_patience", a.plateau_patience}};
    const auto& t = c.ti;
    j["ti"] = {{"history", t.history},
               {"d_gamma", t.d_gamma},
               {"spatial_hidden", t.spatial_hidden},
               {"temporal_hidden", t.temporal_hidden},
               {"activation", t.activation},
               {"neighbors", t.neighbors},
               {"residual", t.residual},
               {"unroll", t.unroll},
               {"schedule", {{"warmup", t.schedule.warmup}, {"total", t.schedule.total}, {"eps_min", t.schedule.eps_min}}},
               {"loss", t.loss},
               {"epochs", t.epochs},
               {"lr", t.lr},
               {"batch", t.batch},
               {"window_stride", t.window_stride},
               {"windows_per_epoch", t.windows_per_epoch},
               {"clip_norm", t.clip_norm},
               {"lr_decay", t.lr_decay},
               {"val_samples", t.val_samples},
               {"resume", t.resume}};
    j["train_window"] = {{"begin", c.train_window.begin}, {"end", c.train_window.end}};
    const auto& r = c.rollout;
    j["rollout"] = {{"horizon", r.horizon},     {"boundary", r.boundary}, {"dirichlet", r.dirichlet},
                    {"decode_steps", r.decode_steps}, {"pgm", r.pgm},      {"pgm_z", r.pgm_z}};
    j["eval"] = {{"t_begin", c.eval.t_begin},
                 {"t_end", c.eval.t_end},
                 {"hold", c.eval.hold ? json(*c.eval.hold) : json(nullptr)},
                 {"melt_temperature", c.eval.melt_temperature}};
    j["sweep"] = {{"axis", c.sweep.axis}, {"values", c.sweep.values}};
    return j;
}

ExperimentConfig from_json(const json& j)
{
    ExperimentConfig c;
    Reader top(j, "config");
    top.get("name", c.name);
    top.get("seed", c.seed);
    top.get("out", c.out);
    top.get("models", c.models);
    if (const json* s = top.child("data")) {
        Reader r(*s, "data");
        auto& d = c.data;
        r.get("path", d.path);
        r.get("pde", d.pde);
        r.get("extents", d.extents);
        r.get("lengths", d.lengths);
        r.get("dt", d.dt);
        r.get("steps", d.steps);
        r.get("stride", d.stride);
        r.get("train", d.train);
        r.get("test", d.test);
        r.get("augment", d.augment);
        r.get("du", d.du);
        r.get("dv", d.dv);
        r.get("k", d.k);
        r.get("g", d.g);
        r.get("h_inside", d.h_inside);
        r.get("h_outside", d.h_outside);
        r.get("passes", d.passes);
        r.get("margin", d.margin);
        r.get("power", d.power);
        r.get("radius", d.radius);
        r.get("conductivity", d.conductivity);
        r.get("density", d.density);
        r.get("heat_capacity", d.heat_capacity);
        r.get("initial_temperature", d.initial_temperature);
        r.get("constant", d.constant);
        r.get("hold_frame", d.hold_frame);
        r.finish();
    }
    if (const json* s = top.child("ae")) {
        Reader r(*s, "ae");
        auto& a = c.ae;
        r.get("patch", a.patch);
        r.get("latent", a.latent);
        r.get("channels", a.channels);
        r.get("kernel", a.kernel);
        r.get("activation", a.activation);
        r.get("epochs", a.epochs);
        r.get("batch", a.batch);
        r.get("lr", a.lr);
        r.get("val_fraction", a.val_fraction);
        r.get("max_steps", a.max_steps);
        r.get("plateau_patience", a.plateau_patience);
        r.finish();
    }
    if (const json* s = top.child("ti")) {
        Reader r(*s, "ti");
        auto& t = c.ti;
        r.get("history", t.history);
        r.get("d_gamma", t.d_gamma);
        r.get("spatial_hidden", t.spatial_hidden);
        r.get("temporal_hidden", t.temporal_hidden);
        r.get("activation", t.activation);
        r.get("neighbors", t.neighbors);
        r.get("residual", t.residual);
        r.get("unroll", t.unroll);
        if (const json* sc = r.child("schedule")) {
            Reader rs(*sc, "ti.schedule");
            rs.get("warmup", t.schedule.warmup);
            rs.get("total", t.schedule.total);
            rs.get("eps_min", t.schedule.eps_min);
            rs.finish();
        }
        r.get("loss", t.loss);
        r.get("epochs", t.epochs);
        r.get("lr", t.lr);
        r.get("batch", t.batch);
        r.get("window_stride", t.window_stride);
        r.get("windows_per_epoch", t.windows_per_epoch);
        r.get("clip_norm", t.clip_norm);
        r.get("lr_decay", t.lr_decay);
        r.get("val_samples", t.val_samples);
        r.get("resume", t.resume);
        r.finish();
    }
    if (const json* s = top.child("train_window")) {
        Reader r(*s, "train_window");
        r.get("begin", c.train_window.begin);
        r.get("end", c.train_window.end);
        r.finish();
    }
    if (const json* s = top.child("rollout")) {
        Reader r(*s, "rollout");
        auto& ro = c.rollout;
        r.get("horizon", ro.horizon);
        r.get("boundary", ro.boundary);
        r.get("dirichlet", ro.dirichlet);
        r.get("decode_steps", ro.decode_steps);
        r.get("pgm", ro.pgm);
        r.get("pgm_z", ro.pgm_z);
        r.finish();
    }
    if (const json* s = top.child("eval")) {
        Reader r(*s, "eval");
        r.get("t_begin", c.eval.t_begin);
        r.get("t_end", c.eval.t_end);
        r.get("hold", c.eval.hold);
        r.get("melt_temperature", c.eval.melt_temperature);
        r.finish();
    }
    if (const json* s = top.child("sweep")) {
        Reader r(*s, "sweep");
        r.get("axis", c.sweep.axis);
        r.get("values", c.sweep.values);
        r.finish();
    }
    top.finish();
    return c;
}

void ExperimentConfig::validate() const
{
    if (out.empty()) fail("out: output directory is empty");
    const auto& d = data;
    if (d.path.empty()) {
        if (d.pde != "diffusion_reaction" && d.pde != "shallow_water" && d.pde != "heat_laser")
            fail("data.pde: unknown pde '" + d.pde + "' (expected diffusion_reaction, shallow_water or heat_laser)");
        const std::size_t dims = d.pde == "heat_laser" ? 3 : 2;
        if (d.extents.size() != dims)
            fail("data.extents: " + d.pde + " needs " + std::to_string(dims) + " extents, got " +
                 std::to_string(d.extents.size()));
        if (!d.lengths.empty() && d.lengths.size() != dims)
            fail("data.lengths: expected " + std::to_string(dims) + " entries");
        if (d.train == 0) fail("data.train: need at least one training sample");
        if (d.steps < 2) fail("data.steps: need at least 2 frames");
        if (d.constant && d.hold_frame >= d.steps) fail("data.hold_frame: outside the stored frames");
        if (d.augment && d.pde != "heat_laser") fail("data.augment: only defined for heat_laser");
        for (auto e : d.extents)
            if (e % ae.patch != 0)
                fail("data.extents: " + std::to_string(e) + " is not a multiple of ae.patch = " + std::to_string(ae.patch) +
                     " (remainder " + std::to_string(e % ae.patch) + ")");
    }
    else if (!std::filesystem::exists(std::filesystem::path(d.path) / "manifest.json"))
        fail("data.path: no manifest.json in '" + d.path + "'");
    if (!models.empty() && !std::filesystem::is_directory(models)) fail("models: '" + models + "' is not a directory");

    // Autoencoder geometry.
    if (ae.latent == 0) fail("ae.latent must be positive");
    if (ae.channels.empty()) fail("ae.channels must list at least one stage");
    const std::size_t reduce = std::size_t(1) << ae.channels.size();
    if (ae.patch % reduce != 0)
        fail("ae.patch = " + std::to_string(ae.patch) + " is not divisible by 2^" + std::to_string(ae.channels.size()) +
             " (one halving per channel stage)");
    if (ae.batch == 0 || !(ae.lr > 0.0)) fail("ae.batch and ae.lr must be positive");
    if (ae.val_fraction < 0.0 || ae.val_fraction >= 1.0) fail("ae.val_fraction must lie in [0, 1)");
    try {
        nn::parse_activation(ae.activation);
        nn::parse_activation(ti.activation);
        ti::parse_loss_space(ti.loss);
        for (const auto& b : rollout.boundary) rollout::parse_boundary(b);
        if (ti.neighbors.find(',') == std::string::npos) decomp::parse_neighbor_mode(ti.neighbors);
        else decomp::NeighborPolicy::parse(ti.neighbors);
    }
    catch (const std::invalid_argument& e) {
        fail(e.what());
    }

    // Integrator and windows.
    if (ti.history == 0) fail("ti.history (th) must be >= 1");
    if (ti.unroll == 0) fail("ti.unroll (K) must be >= 1");
    if (ti.d_gamma == 0) fail("ti.d_gamma must be positive");
    if (ti.batch == 0 || !(ti.lr > 0.0)) fail("ti.batch and ti.lr must be positive");
    ti::CurriculumSchedule sched{ti.schedule.warmup, ti.schedule.total, ti.schedule.eps_min};
    try {
        sched.validate();
    }
    catch (const std::invalid_argument& e) {
        fail(std::string("ti.schedule: ") + e.what());
    }
    if (d.path.empty()) {
        const std::size_t end = train_window.end ? train_window.end : d.steps;
        if (end > d.steps || train_window.begin >= end)
            fail("train_window: [" + std::to_string(train_window.begin) + ", " + std::to_string(end) +
                 ") is not inside the " + std::to_string(d.steps) + " stored frames");
        if (end - train_window.begin < ti.history + ti.unroll)
            fail("train_window: " + std::to_string(end - train_window.begin) + " frames cannot hold th + K = " +
                 std::to_string(ti.history + ti.unroll));
        if (ti.val_samples >= d.train) fail("ti.val_samples must leave at least one training sample");
        if (d.test > 0 && d.steps <= ti.history) fail("data.steps must exceed ti.history");
    }
    if (!rollout.dirichlet.empty()) {
        bool any = false;
        for (const auto& b : rollout.boundary) any |= b == "dirichlet";
        if (!any) fail("rollout.dirichlet: values given but no axis uses a dirichlet directive");
    }
    if (eval.t_end && eval.t_begin >= eval.t_end) fail("eval: t_begin must be below t_end");
    if (eval.t_begin && eval.t_begin < ti.history) fail("eval.t_begin lies inside the history window");
    if (eval.hold && *eval.hold >= (eval.t_begin ? eval.t_begin : ti.history))
        fail("eval.hold must be an observed frame before the evaluation window");
    if (sweep.axis != "history" && sweep.axis != "latent" && sweep.axis != "train_end")
        fail("sweep.axis: unknown axis '" + sweep.axis + "' (expected history, latent or train_end)");
    if (sweep.values.empty()) fail("sweep.values is empty");
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(is);
    }
    catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return from_json(j);
}

void save_config(const ExperimentConfig& c, const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << to_json(c).dump(2) << "\n";
}

} // namespace cmls::pipeline
