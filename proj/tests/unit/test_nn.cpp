#include <doctest.h>

#include "cmls/nn/autograd.hpp"
#include "cmls/nn/checkpoint.hpp"
#include "cmls/nn/gradcheck.hpp"
#include "cmls/nn/layers.hpp"
#include "cmls/nn/optim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace cmls::nn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

void set_params(Layer& layer, const Tensor& w, const Tensor& b)
{
    layer.parameters()[0].mutable_value() = w;
    layer.parameters()[1].mutable_value() = b;
}

// Weighted sum to give every output a distinct sensitivity.
Var probe_loss(const Var& y)
{
    Tensor w(y.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.37 * double(i) + 0.1);
    return sum(tanh(add(y, Var(w))));
}

} // namespace

TEST_CASE("dense identity passes input through")
{
    Rng rng(1);
    Layer layer("d", LayerSpec::dense(3, 3), rng);
    set_params(layer, Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor({3}));
    const Var y = layer.forward(Var(Tensor({1, 3}, {1, 2, 3})));
    CHECK(y.value() == Tensor({1, 3}, {1, 2, 3}));
}

TEST_CASE("1x1 conv with weight 2 doubles the grid")
{
    Rng rng(1);
    Layer layer("c", LayerSpec::conv(1, 1, 1, 1, 2), rng);
    set_params(layer, Tensor({1, 1}, {2.0}), Tensor({1}));
    const Var y = layer.forward(Var(Tensor({1, 1, 2, 2}, {1, 2, 3, 4})));
    CHECK(y.value() == Tensor({1, 1, 2, 2}, {2, 4, 6, 8}));
}

TEST_CASE("3x3 all-ones conv over a 3x3 ones grid counts in-range neighbours")
{
    Rng rng(1);
    Layer layer("c", LayerSpec::conv(1, 1, 3, 1, 2), rng);
    set_params(layer, Tensor({1, 9}, 1.0), Tensor({1}));
    const Var y = layer.forward(Var(Tensor({1, 1, 3, 3}, 1.0)));
    // corners see 2x2 cells, edges 2x3, centre 3x3
    CHECK(y.value() == Tensor({1, 1, 3, 3}, {4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST_CASE("stride-2 same padding halves extents and transpose restores them")
{
    Rng rng(3);
    Layer down("down", LayerSpec::conv(1, 4, 3, 2, 2), rng);
    Layer up("up", LayerSpec::conv_transpose(4, 1, 3, 2, 2), rng);
    CHECK(down.output_shape({1, 8, 8}) == Shape{4, 4, 4});
    CHECK(up.output_shape({4, 4, 4}) == Shape{1, 8, 8});
    const Var x(random_tensor({2, 1, 8, 8}, rng));
    CHECK(up.forward(down.forward(x)).shape() == Shape{2, 1, 8, 8});

    Layer down3("down3", LayerSpec::conv(2, 3, 3, 2, 3), rng);
    CHECK(down3.output_shape({2, 8, 8, 8}) == Shape{3, 4, 4, 4});
}

TEST_CASE("conv_transpose is the adjoint of conv")
{
    Rng rng(11);
    for (std::size_t rank : {2u, 3u}) {
        const std::vector<std::size_t> wide(rank, 6);
        const auto g = same_padding_geometry(wide, 3, 2);
        const std::size_t K = g.kernel_size();
        Shape xs{2, 3};
        Shape ys{2, 4};
        for (std::size_t a = 0; a < rank; ++a) {
            xs.push_back(g.wide[a]);
            ys.push_back(g.narrow[a]);
        }
        const Var w(random_tensor({4, 3 * K}, rng));
        const Var x(random_tensor(xs, rng));
        const Var y(random_tensor(ys, rng));
        const Var cx = conv(x, w, Var(Tensor({4})), g);
        const Var ty = conv_transpose(y, w, Var(Tensor({3})), g);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < y.value().size(); ++i) lhs += cx.value()[i] * y.value()[i];
        for (std::size_t i = 0; i < x.value().size(); ++i) rhs += x.value()[i] * ty.value()[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("backward of summed identity dense gives all-ones gradients")
{
    Rng rng(1);
    Layer layer("d", LayerSpec::dense(2, 2), rng);
    set_params(layer, Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}));
    backward(sum(layer.forward(Var(Tensor({1, 2}, {1, 1})))));
    CHECK(layer.parameters()[0].grad() == Tensor({2, 2}, 1.0));
    CHECK(layer.parameters()[1].grad() == Tensor({2}, 1.0));
}

TEST_CASE("zero loss leaves zero gradients; constant loss without a graph is rejected")
{
    Rng rng(2);
    Layer layer("d", LayerSpec::dense(3, 2), rng);
    backward(scale(sum(layer.forward(Var(random_tensor({4, 3}, rng)))), 0.0));
    for (auto& p : layer.parameters())
        for (double g : p.grad().values()) CHECK(g == 0.0);

    CHECK_THROWS_AS(backward(Var(Tensor({1}, 0.0))), std::logic_error);
    CHECK_THROWS_AS(backward(layer.forward(Var(random_tensor({4, 3}, rng)))), std::invalid_argument);
}

TEST_CASE("gradient accumulation is additive and resettable")
{
    Rng rng(5);
    Layer layer("d", LayerSpec::dense(3, 2), rng);
    const Var x(random_tensor({4, 3}, rng));
    auto loss = [&] { return probe_loss(layer.forward(x)); };
    backward(loss());
    const Tensor once = layer.parameters()[0].grad();
    backward(loss());
    const Tensor twice = layer.parameters()[0].grad();
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
    layer.parameters()[0].zero_grad();
    backward(loss());
    CHECK(layer.parameters()[0].grad() == once);
}

TEST_CASE("every layer kind matches central differences")
{
    Rng rng(7);
    struct Case {
        const char* name;
        LayerSpec spec;
        Shape input;
    };
    const Case cases[] = {
        {"dense", LayerSpec::dense(5, 4), {3, 5}},
        {"conv2d", LayerSpec::conv(2, 3, 3, 2, 2), {2, 2, 6, 6}},
        {"conv2d-stride1", LayerSpec::conv(1, 2, 3, 1, 2), {2, 1, 5, 4}},
        {"conv3d", LayerSpec::conv(1, 2, 3, 2, 3), {1, 1, 4, 4, 4}},
        {"conv_transpose2d", LayerSpec::conv_transpose(3, 2, 3, 2, 2), {2, 3, 3, 3}},
        {"conv_transpose3d", LayerSpec::conv_transpose(2, 1, 3, 2, 3), {1, 2, 2, 2, 2}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        Layer layer(c.name, c.spec, rng);
        for (auto& p : layer.parameters())
            for (auto& v : p.mutable_value().values()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
        Var x(random_tensor(c.input, rng), true);
        ParameterRefs refs;
        for (auto& p : layer.parameters()) refs.push_back(&p);
        const double err = grad_check(refs, [&] { return probe_loss(layer.forward(x)); }, {1e-5, 200, 3});
        CHECK(err < 1e-4);

        // input gradient as well
        Parameter xp("x", x.value());
        ParameterRefs xr{&xp};
        const double xerr = grad_check(xr, [&] { return probe_loss(layer.forward(xp.var())); }, {1e-5, 200, 4});
        CHECK(xerr < 1e-4);
    }

    for (Activation a : {Activation::tanh, Activation::relu, Activation::identity}) {
        CAPTURE(to_string(a));
        Layer layer("act", LayerSpec::act(a), rng);
        Tensor xv = random_tensor({3, 7}, rng);
        for (auto& v : xv.values())
            if (std::abs(v) < 1e-2) v = 0.5;  // keep relu away from its kink
        Parameter xp("x", xv);
        ParameterRefs xr{&xp};
        CHECK(grad_check(xr, [&] { return probe_loss(layer.forward(xp.var())); }) < 1e-4);
    }
}

TEST_CASE("grad_check on small networks")
{
    Rng rng(21);
    const Var x(random_tensor({6, 4}, rng));

    SUBCASE("linear model is exact up to rounding")
    {
        Sequential lin("lin", {4}, {LayerSpec::dense(4, 3)}, rng);
        const double err = grad_check(lin.parameters(), [&] { return sum(lin.forward(x)); });
        CHECK(err < 1e-8);
    }
    SUBCASE("two-layer tanh network")
    {
        Sequential net("tanhnet", {4}, mlp_specs({4, 16, 3}, Activation::tanh), rng);
        CHECK(grad_check(net.parameters(), [&] { return probe_loss(net.forward(x)); }, {1e-5, 64, 9}) < 1e-4);
    }
    SUBCASE("relu network probed away from kinks")
    {
        Sequential net("relunet", {4}, mlp_specs({4, 16, 3}, Activation::relu), rng);
        // all hidden pre-activations must sit farther than 1e-3 from zero
        const Var z = net.layers()[0].forward(x);
        double closest = 1e9;
        for (double v : z.value().values()) closest = std::min(closest, std::abs(v));
        REQUIRE(closest > 1e-3);
        CHECK(grad_check(net.parameters(), [&] { return probe_loss(net.forward(x)); }, {1e-5, 64, 9}) < 1e-4);
    }
}

TEST_CASE("shape mismatch names the layer and both shapes")
{
    Rng rng(1);
    Layer layer("encoder.3", LayerSpec::dense(4, 2), rng);
    try {
        layer.forward(Var(Tensor({2, 5})));
        FAIL("expected throw");
    }
    catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("encoder.3") != std::string::npos);
        CHECK(msg.find("[5]") != std::string::npos);
        CHECK(msg.find("[4]") != std::string::npos);
    }
    CHECK_THROWS_AS(Sequential("bad", {4}, {LayerSpec::dense(4, 3), LayerSpec::dense(2, 1)}, rng),
                    std::invalid_argument);
}

TEST_CASE("adam step")
{
    SUBCASE("zero gradient leaves parameters and moments unchanged")
    {
        Parameter p("w", Tensor({3}, {1, -2, 3}));
        Adam opt({&p});
        opt.step();
        CHECK(p.value() == Tensor({3}, {1, -2, 3}));
        CHECK(opt.first_moments()[0] == Tensor({3}));
        CHECK(opt.second_moments()[0] == Tensor({3}));
        CHECK(opt.steps() == 1);
    }
    SUBCASE("bias-corrected first step moves by lr")
    {
        Parameter p("w", Tensor({1}, {0.5}));
        p.grad()[0] = 1.0;
        Adam opt({&p}, {0.1, 0.9, 0.999, 1e-8});
        opt.step();
        // m_hat = 1, v_hat = 1  =>  delta = lr / (1 + eps)
        CHECK(p.value()[0] == doctest::Approx(0.5 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
    }
    SUBCASE("non-finite gradient is rejected by parameter id")
    {
        Parameter p("layer.7.bias", Tensor({2}));
        p.grad()[1] = std::nan("");
        Adam opt({&p});
        CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("layer.7.bias"), std::domain_error);
        CHECK(p.value() == Tensor({2}));
    }
    SUBCASE("training replay is bit-identical")
    {
        auto run = [] {
            Rng rng(42);
            Sequential net("net", {3}, mlp_specs({3, 8, 2}, Activation::tanh), rng);
            const Var x(random_tensor({5, 3}, rng));
            Adam opt(net.parameters());
            for (int i = 0; i < 20; ++i) {
                opt.zero_grad();
                backward(probe_loss(net.forward(x)));
                opt.step();
            }
            return snapshot(net.parameters());
        };
        const auto a = run();
        const auto b = run();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("gather_rows feeds zeros for sentinel rows and scatters gradients back")
{
    Parameter src("src", Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
    const Var g = gather_rows(src.var(), {2, -1, 0, 0}, 2);
    CHECK(g.value() == Tensor({2, 4}, {5, 6, 0, 0, 1, 2, 1, 2}));
    backward(sum(g));
    CHECK(src.grad() == Tensor({3, 2}, {2, 2, 0, 0, 1, 1}));
}

TEST_CASE("checkpoint container")
{
    const auto dir = std::filesystem::temp_directory_path() / "cmls_test_nn";
    std::filesystem::create_directories(dir);
    Rng rng(9);
    Sequential net("net", {4}, mlp_specs({4, 5, 2}, Activation::relu), rng);
    cmls::io::Metadata meta{{"model", "test"}, {"note", "multi\nline = ok"}};
    put_sequential_specs(meta, "net", net);
    write_checkpoint(dir / "a.cmls", meta, net.parameters());

    const Checkpoint ck = read_checkpoint(dir / "a.cmls");
    CHECK(ck.metadata.at("note") == "multi\nline = ok");
    CHECK(get_sequential_specs(ck.metadata, "net") == net.specs());

    Rng other(10);
    Sequential fresh("net", {4}, get_sequential_specs(ck.metadata, "net"), other);
    load_parameters(ck, fresh.parameters());
    const auto a = snapshot(net.parameters());
    const auto b = snapshot(fresh.parameters());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            CHECK(b[i][j] == static_cast<double>(static_cast<float>(a[i][j])));

    {
        std::fstream f(dir / "a.cmls", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(read_checkpoint(dir / "a.cmls"), cmls::io::FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("structural ops match central differences")
{
    Rng rng(77);
    Parameter a("a", random_tensor({4, 3}, rng));
    Parameter b("b", random_tensor({4, 3}, rng));
    Parameter c("c", random_tensor({4, 2}, rng));
    ParameterRefs refs{&a, &b, &c};
    const Tensor target = random_tensor({3, 6}, rng);
    auto loss = [&] {
        const Var m = mul(a.var(), b.var());
        const Var cat = concat_cols({m, c.var(), slice_cols(a.var(), 1, 1)});
        const Var g = gather_rows(cat, {2, -1, 0, 3, 1, 1}, 1);
        const Var r = reshape(slice_cols(g, 0, 3), {3, 6});
        return add(mse(r, Var(target)), scale(sum(sub(m, a.var())), 0.3));
    };
    CHECK(grad_check(refs, loss) < 1e-6);
}
