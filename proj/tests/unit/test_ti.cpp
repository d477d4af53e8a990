#include <doctest.h>

#include "cmls/nn/gradcheck.hpp"
#include "cmls/ti/train.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

using namespace cmls;
using namespace cmls::ti;
using nn::Tensor;

namespace {

TiConfig small_config(std::size_t l = 4, std::size_t th = 3)
{
    TiConfig c;
    c.solution = {{"u", l}};
    c.history = th;
    c.d_gamma = 8;
    c.spatial_hidden = {16};
    c.temporal_hidden = {16};
    return c;
}

Tensor random_frame(std::size_t n, std::size_t w, std::mt19937_64& rng)
{
    std::normal_distribution<double> d;
    Tensor t({n, w});
    for (auto& v : t.values()) v = d(rng);
    return t;
}

std::vector<Tensor> random_history(std::size_t th, std::size_t n, std::size_t w, std::mt19937_64& rng)
{
    std::vector<Tensor> h;
    for (std::size_t i = 0; i < th; ++i) h.push_back(random_frame(n, w, rng));
    return h;
}

std::vector<EncodedSample> random_samples(std::size_t count, const Extents& lattice, std::size_t steps, std::size_t w,
                                          std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<EncodedSample> out;
    for (std::size_t s = 0; s < count; ++s) {
        EncodedSample e;
        e.lattice = lattice;
        // smooth drift so there is something to learn
        Tensor base = random_frame(cell_count(lattice), w, rng);
        for (std::size_t t = 0; t < steps; ++t) {
            Tensor f = base;
            for (std::size_t i = 0; i < f.size(); ++i) f[i] = base[i] * std::cos(0.2 * double(t)) + 0.1 * double(i % 3);
            e.frames.push_back(f);
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

TEST_CASE("integrator: width algebra")
{
    TiConfig c;
    c.solution = {{"u", 16}};
    CHECK(c.spatial_in() == 80);
    CHECK(c.temporal_in() == 640);
    TimeIntegratorModel m(c, 1);
    CHECK(m.spatial().input_shape() == nn::Shape{80});
    CHECK(m.temporal().output_shape() == nn::Shape{16});

    TiConfig c3;
    c3.dims = 3;
    c3.solution = {{"T", 8}};
    c3.condition = {{"Q", 8}};
    CHECK(c3.spatial_in() == 7 * 16);

    try {
        m.fuse_spatial(std::vector<double>(79, 0.0));
        FAIL("expected width error");
    }
    catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("80") != std::string::npos);
        CHECK(msg.find("79") != std::string::npos);
    }
    CHECK_THROWS_AS(m.predict_next(std::vector<std::vector<double>>(9, std::vector<double>(64))), std::invalid_argument);
    TiConfig bad;
    CHECK_THROWS_AS(TimeIntegratorModel(bad, 0), std::invalid_argument);
}

TEST_CASE("integrator: zero weights")
{
    TimeIntegratorModel m(small_config(), 2);
    auto& last = m.spatial().layers().back();
    last.parameters()[0].mutable_value().fill(0.0);
    for (std::size_t i = 0; i < 8; ++i) last.parameters()[1].mutable_value()[i] = 0.1 * double(i) - 0.3;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> x(m.config().spatial_in());
        for (auto& v : x) v = d(rng);
        const auto g = m.fuse_spatial(x);
        for (std::size_t i = 0; i < 8; ++i) CHECK(g[i] == last.parameters()[1].value()[i]);
    }
    auto& tl = m.temporal().layers().back();
    for (auto& p : tl.parameters()) p.mutable_value().fill(0.0);
    std::vector<std::vector<double>> hist(3, std::vector<double>(8, 0.7));
    for (double v : m.predict_next(hist)) CHECK(v == 0.0);
}

TEST_CASE("integrator: neighbour order is semantic")
{
    TimeIntegratorModel m(small_config(), 3);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d;
    std::vector<double> x(m.config().spatial_in());
    for (auto& v : x) v = d(rng);
    auto y = x;
    // swap the -x and +x neighbour blocks (positions 1 and 2)
    const std::size_t w = m.config().frame_width();
    std::swap_ranges(y.begin() + long(w), y.begin() + long(2 * w), y.begin() + long(2 * w));
    CHECK(m.fuse_spatial(x) != m.fuse_spatial(y));
}

TEST_CASE("step_all: synchronous update is order independent")
{
    TimeIntegratorModel m(small_config(4, 3), 5);
    const Extents lat{4, 4};
    std::mt19937_64 rng(6);
    const auto hist = random_history(3, 16, 4, rng);
    const Tensor a = step_all(m, lat, hist);
    std::vector<std::size_t> order(16);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const Tensor b = step_all(m, lat, hist, order);
    std::reverse(order.begin(), order.end());
    const Tensor c = step_all(m, lat, hist, order);
    CHECK(a == b);
    CHECK(a == c);

    LatentStepper st(m, lat);
    for (const auto& f : hist) st.push(f);
    CHECK(st.step() == a);

    CHECK(step_all(m, {16, 16}, random_history(3, 256, 4, rng)).dim(0) == 256);
    CHECK_THROWS_AS(step_all(m, lat, {hist[0], hist[1]}), std::invalid_argument);
    CHECK_THROWS_AS(step_all(m, lat, hist, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("step_all: locality")
{
    TimeIntegratorModel m(small_config(4, 3), 7);
    const Extents lat{6, 6};
    std::mt19937_64 rng(8);
    auto hist = random_history(3, 36, 4, rng);
    const Tensor base = step_all(m, lat, hist);
    const std::size_t target = decomp::lattice_index(lat, {2, 2});
    const std::size_t far = decomp::lattice_index(lat, {4, 4});
    const std::size_t near = decomp::lattice_index(lat, {2, 3});
    auto row = [](const Tensor& t, std::size_t r) { return std::vector<double>(t.data() + r * 4, t.data() + r * 4 + 4); };

    auto moved = hist;
    for (auto& h : moved)
        for (std::size_t j = 0; j < 4; ++j) h[far * 4 + j] += 1.0;
    CHECK(row(step_all(m, lat, moved), target) == row(base, target));

    auto touched = hist;
    touched.back()[near * 4] += 1.0;
    CHECK(row(step_all(m, lat, touched), target) != row(base, target));
}

TEST_CASE("step_all: a single subdomain sees only zero sentinels")
{
    TimeIntegratorModel m(small_config(4, 2), 9);
    std::mt19937_64 rng(10);
    const auto hist = random_history(2, 1, 4, rng);
    const Tensor out = step_all(m, {1, 1}, hist);
    std::vector<std::vector<double>> gammas;
    for (const auto& h : hist) {
        std::vector<double> x(m.config().spatial_in(), 0.0);
        std::copy(h.data(), h.data() + 4, x.begin());
        gammas.push_back(m.fuse_spatial(x));
    }
    const auto direct = m.predict_next(gammas);
    for (std::size_t j = 0; j < 4; ++j) CHECK(out[j] == direct[j]);
}

TEST_CASE("curriculum schedule")
{
    CurriculumSchedule s{10, 110, 0.0};
    CHECK(cl_probability(s, 0) == 1.0);
    CHECK(cl_probability(s, 9) == 1.0);
    CHECK(cl_probability(s, 10) == 1.0);
    CHECK(cl_probability(s, 60) == 0.5);
    CHECK(cl_probability(s, 110) == 0.0);
    CHECK(cl_probability(s, 500) == 0.0);
    CurriculumSchedule t{5, 25, 0.2};
    CHECK(t.probability(25) == 0.2);
    for (std::size_t e = 1; e < 40; ++e) CHECK(t.probability(e) <= t.probability(e - 1));
    CHECK_THROWS_AS((CurriculumSchedule{0, 10, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("K-step loss matches central differences")
{
    for (bool residual : {false, true}) {
        CAPTURE(residual);
        TiConfig c;
        c.solution = {{"u", 2}};
        c.condition = {{"q", 1}};
        c.history = 2;
        c.d_gamma = 3;
        c.spatial_hidden = {5};
        c.temporal_hidden = {4};
        c.activation = nn::Activation::tanh;
        c.residual = residual;
        TimeIntegratorModel m(c, 11);
        const auto samples = random_samples(2, {2, 2}, 6, 3, 12);
        const std::vector<Window> batch{{0, 0}, {1, 1}, {0, 2}};
        const std::vector<std::uint8_t> flags{0, 1, 0};
        const double err = nn::grad_check(m.parameters(), [&] { return window_loss(m, samples, batch, flags, 2); },
                                          {1e-5, 200, 1});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("train_ti: deterministic replay and learning")
{
    const auto samples = random_samples(3, {3, 3}, 16, 4, 13);
    TiTrainConfig cfg;
    cfg.epochs = 6;
    cfg.unroll = 3;
    cfg.batch = 2;
    cfg.seed = 99;
    cfg.lr = 3e-3;
    cfg.schedule = {1, 5, 0.0};
    auto cfg_model = small_config(4, 3);
    cfg_model.residual = true;
    TimeIntegratorModel a(cfg_model, 14), b(cfg_model, 14);
    const auto ra = train_ti(a, samples, cfg);
    const auto rb = train_ti(b, samples, cfg);
    CHECK(ra.decisions == rb.decisions);
    CHECK(ra.windows == rb.windows);
    const auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value() == pb[i]->value());
    REQUIRE(ra.curve.size() == 6);
    CHECK(ra.curve.back().loss < ra.curve.front().loss);
    CHECK(ra.curve.front().gt_fraction == 1.0);
    CHECK(ra.curve.back().epsilon == 0.0);
    CHECK(ra.decisions.size() == ra.windows.size() * 2);

    TiTrainConfig other = cfg;
    other.seed = 100;
    TimeIntegratorModel c(cfg_model, 14);
    CHECK(train_ti(c, samples, other).decisions != ra.decisions);
}

TEST_CASE("integrator checkpoint round trip")
{
    auto cfg = small_config();
    cfg.condition = {{"q", 2}};
    cfg.policy = decomp::NeighborPolicy{{decomp::NeighborMode::periodic, decomp::NeighborMode::zero}};
    TimeIntegratorModel m(cfg, 15);
    const auto path = std::filesystem::temp_directory_path() / "cmls_test_ti.cmls";
    m.save(path, {{"train.unroll", "10"}});
    io::Metadata meta;
    const auto r = TimeIntegratorModel::load(path, &meta);
    CHECK(r.config() == m.config());
    CHECK(meta.at("train.unroll") == "10");
    std::filesystem::remove(path);
}
