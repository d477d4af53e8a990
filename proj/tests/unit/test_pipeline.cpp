#include <doctest.h>

#include "cmls/pipeline/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace cmls;
using namespace cmls::pipeline;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& name)
{
    ExperimentConfig c;
    c.name = name;
    c.seed = 5;
    c.out = (fs::temp_directory_path() / ("cmls_pipeline_" + name)).string();
    fs::remove_all(c.out);
    c.data.extents = {16, 16};
    c.data.steps = 14;
    c.data.train = 3;
    c.data.test = 2;
    c.ae.latent = 4;
    c.ae.channels = {2, 4};
    c.ae.epochs = 1;
    c.ti.history = 3;
    c.ti.unroll = 2;
    c.ti.d_gamma = 4;
    c.ti.spatial_hidden = {8};
    c.ti.temporal_hidden = {8};
    c.ti.epochs = 2;
    c.ti.windows_per_epoch = 4;
    c.ti.batch = 2;
    c.ti.schedule = {1, 2, 0.0};
    return c;
}

struct Quiet {
    Quiet() { set_log(nullptr); }
    ~Quiet() { set_log(&std::cout); }
};

std::vector<std::string> lines(const fs::path& p)
{
    std::ifstream is(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

} // namespace

TEST_CASE("config: json round trip is lossless")
{
    ExperimentConfig c = tiny("roundtrip");
    c.eval.hold = 2;
    c.rollout.boundary = {"periodic", "none"};
    c.ti.schedule.eps_min = 0.125;
    c.ae.lr = 3.3e-4;
    c.data.lengths = {0.1, 0.3};
    const auto j = to_json(c);
    CHECK(from_json(j) == c);
    CHECK(to_json(from_json(j)) == j);

    const auto path = fs::temp_directory_path() / "cmls_roundtrip.json";
    save_config(c, path);
    CHECK(load_config(path) == c);
    fs::remove(path);

    // absent keys keep their defaults
    CHECK(from_json(nlohmann::json::object()) == ExperimentConfig{});
}

TEST_CASE("config: unknown keys and bad types are rejected")
{
    auto j = to_json(tiny("keys"));
    j["ti"]["histroy"] = 4;
    CHECK_THROWS_AS(from_json(j), ConfigError);
    j = to_json(tiny("keys"));
    j["ae"]["latent"] = "sixteen";
    CHECK_THROWS_AS(from_json(j), ConfigError);
    j = to_json(tiny("keys"));
    j["extra"] = 1;
    CHECK_THROWS_AS(from_json(j), ConfigError);
}

TEST_CASE("config: cross-module checks fail before any work")
{
    auto c = tiny("validate");
    CHECK_NOTHROW(c.validate());

    auto bad = c;
    bad.data.extents = {20, 16};
    try {
        bad.validate();
        FAIL("expected a divisibility error");
    }
    catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("remainder 4") != std::string::npos);
    }
    bad = c;
    bad.ae.channels = {2, 4, 8, 16};  // 8 is not divisible by 2^4
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.ti.history = 13;  // th + K exceeds the 14 frames
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.ti.schedule = {5, 3, 0.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.data.pde = "navier_stokes";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.rollout.boundary = {"wrap"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.sweep.axis = "depth";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.data.path = "/nonexistent/dataset";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generate: manifest, files and seeded reproducibility")
{
    Quiet q;
    auto c = tiny("generate");
    c.data.pde = "shallow_water";
    const auto m = cmd_generate(c);
    const Layout lay(c);
    CHECK(fs::exists(lay.manifest()));
    CHECK(m.train.size() == 3);
    CHECK(m.test.size() == 2);
    CHECK(m.fields.size() == 1);
    const auto back = read_manifest(lay.manifest());
    CHECK(back.train == m.train);
    CHECK(back.grid == m.grid);
    CHECK(back.train_seeds == m.train_seeds);

    const auto a = datagen::read_dataset(lay.data / m.train[0]);
    fs::remove_all(c.out);
    cmd_generate(c);
    const auto b = datagen::read_dataset(lay.data / m.train[0]);
    CHECK(a.series == b.series);
    CHECK(a.config.at("pde.dam_radius") == b.config.at("pde.dam_radius"));
    CHECK(derive_seed(5, 1, 0) != derive_seed(5, 2, 0));
    CHECK(derive_seed(5, 1, 0) != derive_seed(5, 1, 1));
}

TEST_CASE("generate: heat raster with augmentation")
{
    Quiet q;
    auto c = tiny("heat");
    c.data.pde = "heat_laser";
    c.data.extents = {16, 16, 8};
    c.data.steps = 6;
    c.data.train = 1;
    c.data.test = 1;
    c.data.augment = true;
    c.ti.history = 2;
    c.ti.unroll = 2;
    const auto m = cmd_generate(c);
    CHECK(m.train.size() == 4);
    CHECK(m.names(FieldRole::condition) == std::vector<std::string>{"Q"});
}

TEST_CASE("pipeline: training order, resume, rollout and eval outputs")
{
    Quiet q;
    auto c = tiny("flow");
    cmd_generate(c);
    try {
        cmd_train_ti(c);
        FAIL("train-ti must refuse to run without autoencoders");
    }
    catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("train-ae") != std::string::npos);
    }
    const auto aes = cmd_train_ae(c);
    CHECK(aes.size() == 2);
    const Layout lay(c);
    CHECK(fs::exists(lay.ae_write / "u.ckpt"));
    CHECK(lines(lay.ae_write / "u_loss.csv").size() == 2);

    const auto first = cmd_train_ti(c);
    CHECK(first.first_epoch == 0);
    c.ti.resume = true;
    const auto second = cmd_train_ti(c);
    CHECK(second.first_epoch == 2);
    CHECK(second.report.curve.front().epoch == 2);
    const auto rows = lines(lay.ti_write / "loss.csv");
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stoul(rows[i]) == i - 1);

    const auto r = cmd_rollout(c);
    CHECK(r.samples == 2);
    CHECK(r.horizon == 11);
    const auto pred = datagen::read_dataset(r.predictions[0]);
    CHECK(pred.grid.steps == 14);
    CHECK(pred.series.size() == 2);  // u and v
    bool pgm = false;
    for (const auto& e : fs::directory_iterator(lay.rollout_dir() / "frames")) pgm |= e.path().extension() == ".pgm";
    CHECK(pgm);

    const auto ev = cmd_eval(c);
    CHECK(std::isfinite(ev.model.aggregate));
    CHECK(ev.baseline.aggregate > 0.0);
    CHECK(ev.model.t_begin == 3);
    const auto curve = lines(lay.eval_dir() / "curve.csv");
    CHECK(curve.front() == "timestep,nrmse,baseline");
    CHECK(curve.size() == 1 + 11);
    CHECK(fs::exists(lay.eval_dir() / "summary.json"));

    // determinism: retraining from scratch reproduces the checkpoint bytes
    c.ti.resume = false;
    const auto ck = lay.ti_checkpoint(lay.ti_write);
    cmd_train_ti(c);
    std::ifstream a(ck, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    cmd_train_ti(c);
    std::ifstream b(ck, std::ios::binary);
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("sweep: one checkpoint per history length and a comparison table")
{
    Quiet q;
    auto c = tiny("sweep");
    c.data.steps = 28;
    c.sweep.values = {2, 3, 5};
    const auto rows = cmd_sweep(c);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(fs::exists(r.checkpoint));
    const auto table = lines(Layout(c).sweep_dir() / "comparison.csv");
    CHECK(table.size() == 4);
    CHECK(table[1].rfind("history,2,", 0) == 0);
    CHECK(table[3].rfind("history,5,", 0) == 0);

    c.sweep.values = {3, 30};
    CHECK_THROWS_AS(cmd_sweep(c), ConfigError);
}
