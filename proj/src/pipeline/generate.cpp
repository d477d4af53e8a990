#include "cmls/datagen/generators.hpp"
#include "cmls/pipeline/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

namespace cmls::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ostream* g_log = &std::cout;

class NullBuffer : public std::streambuf {
protected:
    int overflow(int c) override { return c; }
};

std::string sample_name(std::size_t i, const std::string& suffix = {})
{
    std::ostringstream os;
    os << "sample_" << std::setw(3) << std::setfill('0') << i << suffix << ".cmld";
    return os.str();
}

} // namespace

void set_log(std::ostream* os) { g_log = os; }

std::ostream& log()
{
    static NullBuffer buf;
    static std::ostream null(&buf);
    return g_log ? *g_log : null;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index)
{
    // splitmix64 over a mixed key
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (tag * 0x100000001B3ull + index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Layout::Layout(const ExperimentConfig& cfg)
{
    root = cfg.out;
    data = cfg.data.path.empty() ? root / "data" : fs::path(cfg.data.path);
    const fs::path models = cfg.models.empty() ? root : fs::path(cfg.models);
    ae_write = root / "ae";
    ti_write = root / "ti";
    ae_read = models / "ae";
    ti_read = models / "ti";
}

std::vector<std::string> Manifest::names(FieldRole role) const
{
    std::vector<std::string> out;
    for (const auto& f : fields)
        if (f.role == role) out.push_back(f.name);
    return out;
}

void write_manifest(const Manifest& m, const fs::path& path)
{
    json j;
    j["pde"] = m.pde;
    j["grid"] = {{"extents", m.grid.extents},
                 {"lengths", m.grid.lengths},
                 {"dt", m.grid.dt},
                 {"steps", m.grid.steps},
                 {"stride", m.grid.stride}};
    for (const auto& f : m.fields) j["fields"].push_back({{"name", f.name}, {"role", to_string(f.role)}, {"units", f.units}});
    j["train"] = m.train;
    j["test"] = m.test;
    j["train_seeds"] = m.train_seeds;
    j["test_seeds"] = m.test_seeds;
    j["data"] = m.data;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << "\n";
}

Manifest read_manifest(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("no dataset manifest at '" + path.string() + "'; run `cmlsim generate` first");
    Manifest m;
    try {
        const json j = json::parse(is);
        m.pde = j.at("pde").get<std::string>();
        const auto& g = j.at("grid");
        m.grid.extents = g.at("extents").get<Extents>();
        m.grid.lengths = g.at("lengths").get<std::vector<double>>();
        m.grid.dt = g.at("dt").get<double>();
        m.grid.steps = g.at("steps").get<std::size_t>();
        m.grid.stride = g.at("stride").get<std::size_t>();
        for (const auto& f : j.at("fields"))
            m.fields.push_back({f.at("name").get<std::string>(), parse_role(f.at("role").get<std::string>()),
                                f.value("units", std::string())});
        m.train = j.at("train").get<std::vector<std::string>>();
        m.test = j.at("test").get<std::vector<std::string>>();
        m.train_seeds = j.value("train_seeds", std::vector<std::uint64_t>{});
        m.test_seeds = j.value("test_seeds", std::vector<std::uint64_t>{});
        m.data = j.value("data", json::object());
    }
    catch (const json::exception& e) {
        throw io::FormatError("manifest '" + path.string() + "': " + e.what());
    }
    return m;
}

std::vector<datagen::Dataset> load_split(const Layout& layout, const Manifest& m, bool test)
{
    std::vector<datagen::Dataset> out;
    for (const auto& name : test ? m.test : m.train) out.push_back(datagen::read_dataset(layout.data / name));
    return out;
}

datagen::GridSpec grid_for(const DataConfig& d)
{
    datagen::GridSpec g;
    g.extents = d.extents;
    g.steps = d.steps;
    g.lengths = d.lengths;
    g.dt = d.dt;
    g.stride = d.stride;
    const std::size_t dims = d.extents.size();
    auto inv_h2 = [&] {
        double s = 0.0;
        for (std::size_t a = 0; a < dims; ++a) s += 1.0 / (g.spacing(a) * g.spacing(a));
        return s;
    };
    if (d.pde == "diffusion_reaction") {
        // 1/64 length per cell keeps the default diffusivities well inside the explicit bound
        if (g.lengths.empty())
            for (auto e : d.extents) g.lengths.push_back(double(e) / 64.0);
        if (g.dt == 0.0) g.dt = 0.005;
        if (g.stride == 0) g.stride = 10;
    }
    else if (d.pde == "shallow_water") {
        if (g.lengths.empty()) g.lengths.assign(dims, 5.0);
        if (g.dt == 0.0) {
            double h = g.spacing(0);
            for (std::size_t a = 1; a < dims; ++a) h = std::min(h, g.spacing(a));
            g.dt = 0.25 * h / std::sqrt(d.g * std::max(d.h_inside, d.h_outside));
        }
        if (g.stride == 0) g.stride = 4;
    }
    else {
        if (g.lengths.empty())
            for (auto e : d.extents) g.lengths.push_back(double(e) / double(d.extents[0]));
        if (g.dt == 0.0) g.dt = 0.2 / (d.conductivity / (d.density * d.heat_capacity) * inv_h2());
        if (g.stride == 0) g.stride = 5;
    }
    return g;
}

namespace {

datagen::Dataset generate_one(const DataConfig& d, const datagen::GridSpec& grid, std::uint64_t seed)
{
    datagen::Dataset ds;
    ds.grid = grid;
    ds.seed = seed;
    if (d.pde == "diffusion_reaction") {
        datagen::DiffusionReactionParams p{d.du, d.dv, d.k};
        ds.series = datagen::gen_diffusion_reaction(grid, p, seed);
        p.to_metadata(ds.config);
    }
    else if (d.pde == "shallow_water") {
        datagen::ShallowWaterParams p;
        p.g = d.g;
        p.h_inside = d.h_inside;
        p.h_outside = d.h_outside;
        ds.series = datagen::gen_swe_dam_break(grid, p, seed);
        p.to_metadata(ds.config);
    }
    else {
        // each sample rasters with its own margin and scan direction
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.5, 1.5);
        const double margin = d.margin * u(rng);
        const bool along_y = (rng() & 1u) != 0;
        auto path = datagen::raster_path(grid, d.passes, margin, (grid.steps - 1) * grid.stride, along_y);
        path.power = d.power;
        path.radius = d.radius;
        path.conductivity = d.conductivity;
        path.density = d.density;
        path.heat_capacity = d.heat_capacity;
        path.initial_temperature = d.initial_temperature;
        ds.series = datagen::gen_heat_laser(grid, path);
        path.to_metadata(ds.config);
    }
    if (d.constant) {
        for (auto& s : ds.series) {
            const Field f = s.field(d.hold_frame);
            for (std::size_t t = 0; t < s.steps; ++t) s.set_frame(t, f);
        }
        ds.config["constant_hold"] = std::to_string(d.hold_frame);
    }
    return ds;
}

} // namespace

Manifest cmd_generate(const ExperimentConfig& cfg, const Layout& layout)
{
    cfg.validate();
    if (!cfg.data.path.empty())
        throw ConfigError("data.path points at an existing dataset; clear it to generate into <out>/data");
    const auto t0 = std::chrono::steady_clock::now();
    const auto& d = cfg.data;
    const auto grid = grid_for(d);
    grid.validate();

    Manifest m;
    m.pde = d.pde;
    m.grid = grid;
    m.data = to_json(cfg)["data"];
    fs::create_directories(layout.data / "train");
    fs::create_directories(layout.data / "test");

    for (int split = 0; split < 2; ++split) {
        const bool test = split == 1;
        const std::size_t count = test ? d.test : d.train;
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint64_t seed = derive_seed(cfg.seed, test ? 2 : 1, i);
            auto ds = generate_one(d, grid, seed);
            if (m.fields.empty())
                for (const auto& s : ds.series) m.fields.push_back({s.name, s.role, s.units});
            const std::string dir = test ? "test/" : "train/";
            if (!test && d.augment) {
                const auto copies = datagen::augment_all({ds.series});
                const char* tags[] = {"", "_rxz", "_ryz", "_rot"};
                for (std::size_t c = 0; c < copies.size(); ++c) {
                    datagen::Dataset a = ds;
                    a.series = copies[c];
                    if (c > 0) a.config["augment"] = tags[c] + 1;
                    const std::string name = dir + sample_name(i, tags[c]);
                    datagen::write_dataset(a, layout.data / name);
                    m.train.push_back(name);
                    m.train_seeds.push_back(seed);
                }
                continue;
            }
            const std::string name = dir + sample_name(i);
            datagen::write_dataset(ds, layout.data / name);
            (test ? m.test : m.train).push_back(name);
            (test ? m.test_seeds : m.train_seeds).push_back(seed);
        }
    }
    write_manifest(m, layout.manifest());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log() << "generate: " << m.train.size() << " train / " << m.test.size() << " test " << d.pde << " samples on "
          << extents_str(grid.extents) << ", " << grid.steps << " frames (" << std::fixed << std::setprecision(1) << secs
          << " s) -> " << layout.data.string() << std::defaultfloat << "\n";
    return m;
}

Manifest cmd_generate(const ExperimentConfig& cfg) { return cmd_generate(cfg, Layout(cfg)); }

} // namespace cmls::pipeline
