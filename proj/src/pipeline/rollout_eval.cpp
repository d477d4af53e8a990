#include "common.hpp"

#include "cmls/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace cmls::pipeline {

namespace fs = std::filesystem;
using detail::Clock;
using nlohmann::json;

namespace {

std::string stem_of(const std::string& rel) { return fs::path(rel).stem().string(); }

std::pair<double, double> value_range(const Field& f)
{
    const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
    return {*lo, *hi};
}

} // namespace

RolloutSummary cmd_rollout(const ExperimentConfig& cfg, const Layout& layout)
{
    cfg.validate();
    Clock clock;
    const Manifest m = read_manifest(layout.manifest());
    if (m.test.empty()) throw ConfigError("dataset has no test samples to roll out");
    const auto aes = detail::load_autoencoders(layout, m);
    const fs::path ckpt = layout.ti_checkpoint(layout.ti_read);
    if (!fs::exists(ckpt))
        throw ConfigError("no time-integrator checkpoint at " + ckpt.string() + "; run cmlsim train-ti first");
    const auto integrator = ti::TimeIntegratorModel::load(ckpt);
    const std::size_t th = integrator.config().history;

    rollout::Models models{aes.solution_ptrs(), aes.condition_ptrs(), &integrator};
    rollout::RolloutPlan base;
    if (m.grid.steps <= th) throw ConfigError("test series are not longer than the history th = " + std::to_string(th));
    base.horizon = cfg.rollout.horizon ? cfg.rollout.horizon : m.grid.steps - th;
    base.decode_steps = cfg.rollout.decode_steps;
    for (const auto& b : cfg.rollout.boundary) {
        rollout::AxisDirective d;
        d.kind = rollout::parse_boundary(b);
        if (d.kind == rollout::BoundaryKind::dirichlet) d.values = cfg.rollout.dirichlet;
        base.boundary.push_back(d);
    }

    const auto test = load_split(layout, m, true);
    // every consistency rule is checked on the first sample before any stepping
    {
        auto plan = base;
        for (const auto& s : test[0].series) (s.role == FieldRole::solution ? plan.initial : plan.conditions).push_back(s);
        try {
            rollout::validate_plan(models, plan);
        }
        catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    RolloutSummary out;
    out.history = th;
    out.horizon = base.horizon;
    fs::create_directories(layout.rollout_dir());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& ds = test[i];
        auto plan = base;
        for (const auto& s : ds.series) (s.role == FieldRole::solution ? plan.initial : plan.conditions).push_back(s);
        rollout::RolloutResult r;
        try {
            r = rollout::run(models, plan);
        }
        catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (test sample " + std::to_string(i) + ")", e.timestep());
        }

        datagen::Dataset pred;
        pred.grid = ds.grid;
        pred.grid.steps = th + base.horizon;
        pred.series = r.series;
        pred.seed = ds.seed;
        pred.config = ds.config;
        pred.config["prediction.source"] = m.test[i];
        pred.config["prediction.history"] = std::to_string(th);
        pred.config["prediction.horizon"] = std::to_string(base.horizon);
        const fs::path file = layout.rollout_dir() / (stem_of(m.test[i]) + ".cmld");
        datagen::write_dataset(pred, file);
        out.predictions.push_back(file);

        if (cfg.rollout.pgm) {
            const std::size_t last = r.decoded.empty() ? th - 1 : r.decoded.back();
            for (const auto& s : r.series) {
                const Field p = s.field(last);
                const auto& gt = find_series(ds.series, s.name);
                const bool have_gt = last < gt.steps;
                const Field g = have_gt ? gt.field(last) : p;
                const auto [lo, hi] = value_range(g);
                const std::size_t z = p.dims() == 3 ? (cfg.rollout.pgm_z ? cfg.rollout.pgm_z : p.extents[2] - 1) : 0;
                const std::string tag = stem_of(m.test[i]) + "_" + s.name + "_t" + std::to_string(last);
                rollout::write_pgm(layout.rollout_dir() / "frames" / (tag + "_pred.pgm"), p, z, lo, hi);
                if (have_gt) rollout::write_pgm(layout.rollout_dir() / "frames" / (tag + "_true.pgm"), g, z, lo, hi);
            }
        }
        ++out.samples;
    }
    out.seconds = clock.seconds();
    log() << "rollout: " << out.samples << " samples, th=" << th << ", T=" << base.horizon << " (" << std::fixed
          << std::setprecision(1) << out.seconds << " s)" << std::defaultfloat << "\n";
    return out;
}

RolloutSummary cmd_rollout(const ExperimentConfig& cfg) { return cmd_rollout(cfg, Layout(cfg)); }

EvalSummary cmd_eval(const ExperimentConfig& cfg, const Layout& layout)
{
    cfg.validate();
    const Manifest m = read_manifest(layout.manifest());
    if (!cfg.rollout.decode_steps.empty())
        throw ConfigError("eval needs every predicted frame decoded; clear rollout.decode_steps");
    const auto test = load_split(layout, m, true);
    std::vector<SeriesSet> gt, pred;
    std::size_t th = 0, steps = 0;
    for (std::size_t i = 0; i < m.test.size(); ++i) {
        const fs::path file = layout.rollout_dir() / (stem_of(m.test[i]) + ".cmld");
        if (!fs::exists(file)) throw ConfigError("no prediction at " + file.string() + "; run cmlsim rollout first");
        auto ds = datagen::read_dataset(file);
        th = io::get_size(ds.config, "prediction.history");
        steps = ds.grid.steps;
        pred.push_back(std::move(ds.series));
        gt.push_back(test[i].series);
    }
    if (pred.empty()) throw ConfigError("dataset has no test samples to evaluate");

    const std::size_t t_begin = cfg.eval.t_begin ? cfg.eval.t_begin : th;
    const std::size_t t_end = cfg.eval.t_end ? cfg.eval.t_end : std::min(steps, m.grid.steps);
    if (t_begin < th) throw ConfigError("eval window starts inside the history [0, " + std::to_string(th) + ")");
    if (t_end > std::min(steps, m.grid.steps) || t_begin >= t_end)
        throw ConfigError("eval window [" + std::to_string(t_begin) + ", " + std::to_string(t_end) +
                          ") is not covered by both the rollout and the ground truth");
    const std::size_t hold = cfg.eval.hold ? *cfg.eval.hold : th - 1;

    EvalSummary s;
    std::vector<std::string> vars;
    for (const auto& p : pred[0]) vars.push_back(p.name);
    s.model = eval::nrmse_window(pred, gt, t_begin, t_end);
    s.baseline = eval::nrmse_window(eval::persistence_prediction(gt, hold, vars), gt, t_begin, t_end);
    s.model.th = s.baseline.th = th;

    fs::create_directories(layout.eval_dir());
    eval::write_rows_csv(layout.eval_dir() / "nrmse.csv", s.model, s.baseline.aggregate);
    eval::write_rows_csv(layout.eval_dir() / "baseline.csv", s.baseline);
    eval::write_curve_csv(layout.eval_dir() / "curve.csv", s.model, &s.baseline);

    json j;
    j["window"] = {t_begin, t_end};
    j["history"] = th;
    j["persistence_frame"] = hold;
    j["aggregate"] = s.model.aggregate;
    j["baseline"] = s.baseline.aggregate;
    j["excluded_terms"] = s.model.excluded;
    j["per_sample"] = s.model.per_sample;
    j["baseline_per_sample"] = s.baseline.per_sample;
    j["per_variable"] = s.model.per_variable;
    std::ofstream(layout.eval_dir() / "summary.json") << j.dump(2) << "\n";

    if (cfg.eval.melt_temperature > 0.0 && m.grid.dims() == 3) {
        std::ofstream os(layout.eval_dir() / "melt_depth.csv");
        os << "sample,timestep,predicted,true\n" << std::setprecision(10);
        const std::string name = vars.front();
        const double dz = m.grid.spacing(2);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const auto dp = eval::melt_pool_depth(find_series(pred[i], name), cfg.eval.melt_temperature, dz);
            const auto dg = eval::melt_pool_depth(find_series(gt[i], name), cfg.eval.melt_temperature, dz);
            for (std::size_t t = t_begin; t < t_end; ++t) os << i << "," << t << "," << dp[t] << "," << dg[t] << "\n";
        }
    }

    log() << std::setprecision(6) << "eval: window [" << t_begin << ", " << t_end << "), " << pred.size()
          << " samples\n"
          << "  aggregate nRMSE   model " << std::setw(12) << s.model.aggregate << "   persistence " << std::setw(12)
          << s.baseline.aggregate << "\n";
    for (std::size_t i = 0; i < pred.size(); ++i)
        log() << "  sample " << std::setw(3) << i << "       model " << std::setw(12) << s.model.per_sample[i]
              << "   persistence " << std::setw(12) << s.baseline.per_sample[i] << "\n";
    return s;
}

EvalSummary cmd_eval(const ExperimentConfig& cfg) { return cmd_eval(cfg, Layout(cfg)); }

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Layout main(cfg);
    if (!fs::exists(main.manifest())) cmd_generate(cfg, main);
    const bool retrain_ae = cfg.sweep.axis == "latent";
    const Manifest manifest = read_manifest(main.manifest());
    std::vector<ExperimentConfig> subs;
    for (std::size_t v : cfg.sweep.values) {
        ExperimentConfig sub = cfg;
        if (cfg.sweep.axis == "history") sub.ti.history = v;
        else if (cfg.sweep.axis == "latent") sub.ae.latent = v;
        else sub.train_window.end = v;
        sub.ti.resume = false;
        sub.out = (main.sweep_dir() / (cfg.sweep.axis + "_" + std::to_string(v))).string();
        sub.data.path = main.data.string();
        try {
            sub.validate();
            validate_against(sub, manifest);
        }
        catch (const ConfigError& e) {
            throw ConfigError("sweep " + cfg.sweep.axis + " = " + std::to_string(v) + ": " + e.what());
        }
        subs.push_back(std::move(sub));
    }
    if (!retrain_ae && !fs::exists(main.ae_checkpoint(main.ae_read, manifest.fields.at(0).name))) cmd_train_ae(cfg, main);

    std::vector<SweepRow> rows;
    fs::create_directories(main.sweep_dir());
    std::ofstream os(main.sweep_dir() / "comparison.csv");
    os << "axis,value,aggregate,baseline,final_loss,seconds,checkpoint\n" << std::setprecision(10);
    for (std::size_t k = 0; k < subs.size(); ++k) {
        const auto& sub = subs[k];
        const std::size_t v = cfg.sweep.values[k];
        Layout lay(sub);
        lay.data = main.data;
        if (!retrain_ae) lay.ae_read = main.ae_read;
        lay.ti_read = lay.ti_write;
        log() << "sweep: " << cfg.sweep.axis << " = " << v << "\n";
        Clock clock;
        if (retrain_ae) {
            cmd_train_ae(sub, lay);
            lay.ae_read = lay.ae_write;
        }
        const auto tr = cmd_train_ti(sub, lay);
        cmd_rollout(sub, lay);
        const auto ev = cmd_eval(sub, lay);
        SweepRow row{v, ev.model.aggregate, ev.baseline.aggregate, lay.ti_checkpoint(lay.ti_write)};
        const double final_loss = tr.report.curve.empty() ? std::nan("") : tr.report.curve.back().loss;
        os << cfg.sweep.axis << "," << v << "," << row.aggregate << "," << row.baseline << "," << final_loss << ","
           << clock.seconds() << "," << row.checkpoint.string() << "\n";
        os.flush();
        rows.push_back(row);
    }
    return rows;
}

} // namespace cmls::pipeline
