#include <doctest.h>

#include "cmls/eval/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace cmls;
using namespace cmls::eval;

namespace {

FieldSeries noise(const std::string& name, std::size_t n, std::size_t steps, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    FieldSeries s(name, FieldRole::solution, {n, n}, steps);
    for (auto& v : s.values) v = float(d(rng));
    return s;
}

std::vector<SeriesSet> sets(std::size_t samples, std::size_t steps, std::uint64_t seed)
{
    std::vector<SeriesSet> out;
    for (std::size_t s = 0; s < samples; ++s)
        out.push_back({noise("u", 8, steps, seed + 2 * s), noise("v", 8, steps, seed + 2 * s + 1)});
    return out;
}

std::vector<SeriesSet> scaled(std::vector<SeriesSet> in, double factor, double shift = 0.0)
{
    for (auto& set : in)
        for (auto& s : set)
            for (auto& v : s.values) v = float(double(v) * factor + shift);
    return in;
}

// Independent term: ||p - g|| / ||g|| with long double accumulation.
double oracle_term(std::span<const float> p, std::span<const float> g)
{
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const long double e = (long double)p[i] - (long double)g[i];
        num += e * e;
        den += (long double)g[i] * (long double)g[i];
    }
    return double(std::sqrt(num / den));
}

} // namespace

TEST_CASE("nrmse: closed-form oracles")
{
    const auto gt = sets(3, 12, 1);
    CHECK(nrmse(gt, gt, 4).aggregate == 0.0);
    CHECK(std::abs(nrmse(scaled(gt, 0.0), gt, 4).aggregate - 1.0) < 1e-12);
    const auto r = nrmse(scaled(gt, 1.3), gt, 4);
    // 1.3 is not exact in float, so compare to the stored values
    double expect = 0.0;
    const auto p = scaled(gt, 1.3);
    std::size_t n = 0;
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t v = 0; v < 2; ++v)
            for (std::size_t t = 4; t < 12; ++t, ++n) expect += oracle_term(p[s][v].frame(t), gt[s][v].frame(t));
    CHECK(std::abs(r.aggregate - expect / double(n)) < 1e-12);
    CHECK(std::abs(r.aggregate - 0.3) < 1e-6);
    CHECK(r.rows.size() == 3 * 2 * 8);
    CHECK(r.n_test == 3);
    CHECK(r.n_var == 2);
    CHECK(r.timesteps.front() == 4);
    CHECK(r.timesteps.back() == 11);
}

TEST_CASE("nrmse: hand fixtures")
{
    // two cells, gt = [3, 4] at both evaluated steps, errors of norm 1 and 2
    std::vector<SeriesSet> gt(1), pred(1);
    gt[0].push_back(FieldSeries("u", FieldRole::solution, {2, 1}, 3));
    for (std::size_t t = 0; t < 3; ++t) {
        gt[0][0].frame(t)[0] = 3.0f;
        gt[0][0].frame(t)[1] = 4.0f;
    }
    pred = gt;
    pred[0][0].frame(1)[0] = 4.0f;  // error [1, 0]
    pred[0][0].frame(2)[1] = 6.0f;  // error [0, 2]
    const auto r = nrmse(pred, gt, 1);
    CHECK(std::abs(r.aggregate - 0.3) < 1e-12);
    CHECK(std::abs(r.curve[0] - 0.2) < 1e-12);
    CHECK(std::abs(r.curve[1] - 0.4) < 1e-12);

    const auto g = sets(2, 6, 4);
    CHECK(std::abs(nrmse(scaled(g, 2.0), g, 2).aggregate - 1.0) < 1e-12);
}

TEST_CASE("nrmse: random prediction matches the oracle")
{
    const auto gt = sets(2, 6, 10);
    const auto pred = sets(2, 6, 50);
    const auto r = nrmse_window(pred, gt, 1, 6);
    double sum = 0.0;
    for (const auto& row : r.rows) {
        const std::size_t v = row.variable == "u" ? 0 : 1;
        const double o = oracle_term(pred[row.sample][v].frame(row.timestep), gt[row.sample][v].frame(row.timestep));
        CHECK(std::abs(row.value - o) < 1e-12);
        sum += o;
    }
    CHECK(std::abs(r.aggregate - sum / double(r.rows.size())) < 1e-12);
}

TEST_CASE("nrmse: scale invariance")
{
    const auto gt = sets(2, 8, 3);
    const auto pred = sets(2, 8, 30);
    const double a = nrmse(pred, gt, 2).aggregate;
    // powers of two scale float values exactly
    const double b = nrmse(scaled(pred, 8.0), scaled(gt, 8.0), 2).aggregate;
    CHECK(std::abs(a - b) < 1e-12);
    const double c = nrmse(scaled(pred, 1.0 / 1024.0), scaled(gt, 1.0 / 1024.0), 2).aggregate;
    CHECK(std::abs(a - c) < 1e-12);
    const double d = nrmse(scaled(pred, 3.7), scaled(gt, 3.7), 2).aggregate;
    CHECK(std::abs(a - d) < 1e-6);
}

TEST_CASE("nrmse: curve, per-variable and per-sample views agree with the aggregate")
{
    const auto gt = sets(4, 10, 7);
    const auto pred = sets(4, 10, 70);
    const auto r = nrmse(pred, gt, 3);
    REQUIRE(r.curve.size() == 7);
    double m = 0.0;
    for (double c : r.curve) m += c;
    CHECK(std::abs(m / 7.0 - r.aggregate) < 1e-12);
    double pv = 0.0;
    for (const auto& [k, v] : r.per_variable) pv += v;
    CHECK(std::abs(pv / 2.0 - r.aggregate) < 1e-12);
    double ps = 0.0;
    for (double v : r.per_sample) ps += v;
    CHECK(std::abs(ps / 4.0 - r.aggregate) < 1e-12);
}

TEST_CASE("nrmse: zero-norm terms are excluded")
{
    auto gt = sets(1, 5, 8);
    for (auto& v : gt[0][1].frame(3)) v = 0.0f;
    const auto pred = scaled(gt, 0.0);
    const auto r = nrmse(pred, gt, 1);
    CHECK(r.excluded == 1);
    CHECK(r.rows.size() == 8);
    CHECK(std::abs(r.aggregate - 1.0) < 1e-12);
    CHECK(std::isfinite(r.aggregate));
    CHECK(r.curve_count[2] == 1);

    for (auto& s : gt[0])
        for (auto& v : s.values) v = 0.0f;
    CHECK_THROWS_AS(nrmse(pred, gt, 1), std::domain_error);
}

TEST_CASE("nrmse: contract errors")
{
    const auto gt = sets(2, 6, 9);
    CHECK_THROWS_AS(nrmse(sets(1, 6, 9), gt, 2), std::invalid_argument);
    CHECK_THROWS_AS(nrmse(sets(2, 4, 9), gt, 2), std::invalid_argument);
    CHECK_THROWS_AS(nrmse(gt, gt, 6), std::invalid_argument);
    auto renamed = gt;
    renamed[0][0].name = "w";
    CHECK_THROWS(nrmse(renamed, gt, 2));
}

TEST_CASE("persistence: constant series scores zero, doubling series has closed form")
{
    std::vector<SeriesSet> flat(1);
    flat[0].push_back(FieldSeries("u", FieldRole::solution, {4, 4}, 8));
    for (auto& v : flat[0][0].values) v = 2.5f;
    CHECK(persistence_baseline(flat, 3, {"u"}).aggregate == 0.0);

    auto base = noise("u", 4, 1, 5);
    std::vector<SeriesSet> dbl(1);
    dbl[0].push_back(FieldSeries("u", FieldRole::solution, {4, 4}, 9));
    for (std::size_t t = 0; t < 9; ++t)
        for (std::size_t i = 0; i < 16; ++i) dbl[0][0].frame(t)[i] = float(std::ldexp(double(base.values[i]), int(t)));
    // hold frame 0: term at step k is |2^k - 1| / 2^k
    const auto r = persistence_baseline(dbl, 1, {"u"});
    double mean = 0.0;
    for (std::size_t k = 1; k < 9; ++k) {
        const double expect = (std::ldexp(1.0, int(k)) - 1.0) / std::ldexp(1.0, int(k));
        CHECK(std::abs(r.curve[k - 1] - expect) < 1e-12);
        mean += expect;
    }
    CHECK(std::abs(r.aggregate - mean / 8.0) < 1e-12);

    const auto held = persistence_prediction(dbl, 4, {"u"});
    for (std::size_t t = 5; t < 9; ++t) {
        const std::span<const float> a = held[0][0].frame(t), b = dbl[0][0].frame(4);
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
    CHECK_THROWS_AS(persistence_baseline(dbl, 0, {"u"}), std::invalid_argument);
}

TEST_CASE("melt-pool depth counts hot layers from the top")
{
    FieldSeries T("T", FieldRole::solution, {4, 4, 5}, 3);
    const double dz = 0.2;
    auto set = [&](std::size_t t, std::size_t k, float v) { T.frame(t)[(1 * 4 + 2) * 5 + k] = v; };
    set(1, 4, 2.0f);
    set(2, 4, 2.0f);
    set(2, 3, 2.0f);
    set(2, 2, 2.0f);
    set(2, 0, 2.0f);  // below a cold layer, not counted
    const auto d = melt_pool_depth(T, 1.0, dz);
    REQUIRE(d.size() == 3);
    CHECK(d[0] == 0.0);
    CHECK(std::abs(d[1] - dz) < 1e-15);
    CHECK(std::abs(d[2] - 3 * dz) < 1e-15);
    CHECK_THROWS_AS(melt_pool_depth(noise("u", 4, 2, 1), 1.0, dz), std::invalid_argument);
}

TEST_CASE("eval csv output")
{
    const auto gt = sets(2, 5, 4);
    const auto r = nrmse(scaled(gt, 0.0), gt, 2);
    const auto b = persistence_baseline(gt, 2, {"u", "v"});
    const auto dir = std::filesystem::temp_directory_path() / "cmls_eval_csv";
    write_rows_csv(dir / "rows.csv", r, b.aggregate);
    write_curve_csv(dir / "curve.csv", r, &b);

    std::ifstream rows(dir / "rows.csv");
    std::string line;
    std::getline(rows, line);
    CHECK(line == "sample,variable,timestep,nrmse,excluded");
    std::size_t data = 0;
    bool agg = false, base = false;
    while (std::getline(rows, line)) {
        if (line.rfind("# aggregate,", 0) == 0) agg = std::abs(std::stod(line.substr(12)) - 1.0) < 1e-9;
        else if (line.rfind("# baseline,", 0) == 0) base = std::abs(std::stod(line.substr(11)) - b.aggregate) < 1e-8;
        else ++data;
    }
    CHECK(data == 2 * 2 * 3);
    CHECK(agg);
    CHECK(base);

    std::ifstream curve(dir / "curve.csv");
    std::getline(curve, line);
    CHECK(line == "timestep,nrmse,baseline");
    std::getline(curve, line);
    CHECK(line.rfind("2,1,", 0) == 0);
    std::filesystem::remove_all(dir);
}
