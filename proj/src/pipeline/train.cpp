#include "common.hpp"

#include "cmls/nn/layers.hpp"
#include "cmls/parallel.hpp"

#include <fstream>
#include <iomanip>

namespace cmls::pipeline {

namespace fs = std::filesystem;
using detail::Clock;

namespace detail {

std::vector<const ae::AutoencoderModel*> AeSet::solution_ptrs() const
{
    std::vector<const ae::AutoencoderModel*> out;
    for (const auto& m : solution) out.push_back(m.get());
    return out;
}

std::vector<const ae::AutoencoderModel*> AeSet::condition_ptrs() const
{
    std::vector<const ae::AutoencoderModel*> out;
    for (const auto& m : condition) out.push_back(m.get());
    return out;
}

AeSet load_autoencoders(const Layout& layout, const Manifest& m)
{
    AeSet set;
    for (const auto& f : m.fields) {
        const fs::path path = layout.ae_checkpoint(layout.ae_read, f.name);
        if (!fs::exists(path))
            throw ConfigError("no autoencoder checkpoint for field '" + f.name + "' at " + path.string() +
                              "; train the autoencoders first (cmlsim train-ae), then the time integrator");
        auto model = std::make_unique<ae::AutoencoderModel>(ae::AutoencoderModel::load(path));
        if (model->field() != f.name)
            throw io::FormatError(path.string() + " holds field '" + model->field() + "', expected '" + f.name + "'");
        (f.role == FieldRole::solution ? set.solution : set.condition).push_back(std::move(model));
    }
    return set;
}

ti::TiConfig integrator_config(const ExperimentConfig& cfg, const Manifest& m, const AeSet& aes)
{
    ti::TiConfig t;
    t.dims = m.grid.dims();
    t.history = cfg.ti.history;
    t.d_gamma = cfg.ti.d_gamma;
    t.spatial_hidden = cfg.ti.spatial_hidden;
    t.temporal_hidden = cfg.ti.temporal_hidden;
    t.activation = nn::parse_activation(cfg.ti.activation);
    t.residual = cfg.ti.residual;
    t.policy = cfg.ti.neighbors.find(',') == std::string::npos
                   ? decomp::NeighborPolicy::uniform(decomp::parse_neighbor_mode(cfg.ti.neighbors), t.dims)
                   : decomp::NeighborPolicy::parse(cfg.ti.neighbors);
    return ti::roster_config(t, aes.solution_ptrs(), aes.condition_ptrs());
}

std::vector<const FieldSeries*> series_of(const std::vector<datagen::Dataset>& sets, const std::string& field)
{
    std::vector<const FieldSeries*> out;
    for (const auto& ds : sets) out.push_back(&find_series(ds.series, field));
    return out;
}

} // namespace detail

namespace {

std::pair<std::size_t, std::size_t> train_frames(const ExperimentConfig& cfg, const Manifest& m)
{
    const std::size_t end = cfg.train_window.end ? cfg.train_window.end : m.grid.steps;
    if (end > m.grid.steps || cfg.train_window.begin >= end)
        throw ConfigError("train_window [" + std::to_string(cfg.train_window.begin) + ", " + std::to_string(end) +
                          ") does not fit the " + std::to_string(m.grid.steps) + " stored frames");
    return {cfg.train_window.begin, end};
}

void check_patch(const ExperimentConfig& cfg, const Manifest& m)
{
    try {
        decomp::lattice_extents(m.grid.extents, cfg.ae.patch);
    }
    catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

} // namespace

void validate_against(const ExperimentConfig& cfg, const Manifest& m)
{
    check_patch(cfg, m);
    const auto [begin, end] = train_frames(cfg, m);
    if (end - begin < cfg.ti.history + cfg.ti.unroll)
        throw ConfigError("train_window [" + std::to_string(begin) + ", " + std::to_string(end) + ") holds " +
                          std::to_string(end - begin) + " frames, fewer than th + K = " +
                          std::to_string(cfg.ti.history + cfg.ti.unroll));
    if (cfg.ti.val_samples >= m.train.size())
        throw ConfigError("ti.val_samples must leave at least one of the " + std::to_string(m.train.size()) +
                          " training samples");
    if (!m.test.empty() && m.grid.steps <= cfg.ti.history)
        throw ConfigError("test series have " + std::to_string(m.grid.steps) + " frames, not more than th = " +
                          std::to_string(cfg.ti.history));
}

std::vector<AeSummary> cmd_train_ae(const ExperimentConfig& cfg, const Layout& layout)
{
    cfg.validate();
    const Manifest m = read_manifest(layout.manifest());
    validate_against(cfg, m);
    const auto [begin, end] = train_frames(cfg, m);
    const auto train = load_split(layout, m, false);
    fs::create_directories(layout.ae_write);

    ae::AutoencoderConfig ac;
    ac.dims = m.grid.dims();
    ac.patch = cfg.ae.patch;
    ac.latent = cfg.ae.latent;
    ac.channels = cfg.ae.channels;
    ac.kernel = cfg.ae.kernel;
    ac.activation = nn::parse_activation(cfg.ae.activation);

    std::vector<AeSummary> out;
    for (std::size_t fi = 0; fi < m.fields.size(); ++fi) {
        const auto& field = m.fields[fi];
        Clock clock;
        const auto series = detail::series_of(train, field.name);
        std::vector<double> values;
        for (const auto* s : series)
            for (std::size_t t = begin; t < end; ++t)
                for (float v : s->frame(t)) values.push_back(v);
        const auto stats = decomp::compute_stats(values);
        const nn::Tensor patches = ae::collect_patches(series, cfg.ae.patch, stats, begin, end);

        ae::AutoencoderModel model(ac, field.name, stats, derive_seed(cfg.seed, detail::kAeSeedTag, fi));
        ae::AeTrainConfig tc;
        tc.epochs = cfg.ae.epochs;
        tc.batch = cfg.ae.batch;
        tc.lr = cfg.ae.lr;
        tc.seed = derive_seed(cfg.seed, detail::kAeSeedTag + 1, fi);
        tc.val_fraction = cfg.ae.val_fraction;
        tc.max_steps = cfg.ae.max_steps;
        tc.plateau_patience = cfg.ae.plateau_patience;

        const fs::path csv = layout.ae_write / (field.name + "_loss.csv");
        std::ofstream os(csv);
        os << "epoch,train_mse,val_mse,lr\n" << std::setprecision(10);
        log() << "train-ae '" << field.name << "': " << patches.dim(0) << " patches, l=" << ac.latent << "\n";
        AeSummary s;
        s.field = field.name;
        s.report = ae::train_autoencoder(model, patches, tc, [&](const ae::AeEpoch& e) {
            os << e.epoch << "," << e.train_mse << "," << e.val_mse << "," << e.lr << "\n";
            os.flush();
        });
        if (s.report.diverged) log() << "train-ae '" << field.name << "': loss went non-finite, kept last good weights\n";

        io::Metadata extra{{"train.epochs", std::to_string(s.report.curve.size())},
                           {"train.window", std::to_string(begin) + "," + std::to_string(end)},
                           {"train.seed", std::to_string(cfg.seed)}};
        model.save(layout.ae_checkpoint(layout.ae_write, field.name), extra);
        // score the weights exactly as they were stored
        const auto reloaded = ae::AutoencoderModel::load(layout.ae_checkpoint(layout.ae_write, field.name));
        s.rel_l2 = ae::reconstruction_error(reloaded, patches).rel_l2;
        s.seconds = clock.seconds();
        log() << "train-ae '" << field.name << "': best epoch " << s.report.best_epoch << ", rel L2 " << s.rel_l2 << " ("
              << std::fixed << std::setprecision(1) << s.seconds << " s)" << std::defaultfloat << "\n";
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AeSummary> cmd_train_ae(const ExperimentConfig& cfg) { return cmd_train_ae(cfg, Layout(cfg)); }

TiSummary cmd_train_ti(const ExperimentConfig& cfg, const Layout& layout)
{
    cfg.validate();
    Clock clock;
    const Manifest m = read_manifest(layout.manifest());
    validate_against(cfg, m);
    const auto [begin, end] = train_frames(cfg, m);
    const auto aes = detail::load_autoencoders(layout, m);
    const ti::TiConfig tcfg = detail::integrator_config(cfg, m, aes);
    try {
        tcfg.validate();
    }
    catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (aes.solution.empty()) throw ConfigError("dataset has no solution field to integrate");

    const auto train = load_split(layout, m, false);
    std::vector<ti::EncodedSample> samples;
    const bool decoded = ti::parse_loss_space(cfg.ti.loss) == ti::LossSpace::decoded;
    for (const auto& ds : train) {
        std::vector<std::vector<ae::LatentFrame>> fields;
        for (const auto* group : {&aes.solution, &aes.condition})
            for (const auto& a : *group) fields.push_back(ae::encode_series(*a, find_series(ds.series, a->field()), 0, end));
        ti::EncodedSample e;
        e.lattice = decomp::lattice_extents(ds.grid.extents, cfg.ae.patch);
        e.frames = ti::combine_series(fields);
        if (decoded)
            for (const auto& a : aes.solution) {
                std::vector<nn::Tensor> per_t;
                const auto& s = find_series(ds.series, a->field());
                for (std::size_t t = 0; t < end; ++t) per_t.push_back(ae::collect_patches({&s}, cfg.ae.patch, a->stats(), t, t + 1));
                e.patches.push_back(std::move(per_t));
            }
        samples.push_back(std::move(e));
    }
    std::vector<ti::EncodedSample> validation;
    for (std::size_t i = 0; i < cfg.ti.val_samples; ++i) {
        validation.insert(validation.begin(), std::move(samples.back()));
        samples.pop_back();
    }

    const fs::path ckpt = layout.ti_checkpoint(layout.ti_write);
    std::size_t start = 0;
    std::optional<ti::TimeIntegratorModel> model;
    if (cfg.ti.resume && fs::exists(ckpt)) {
        io::Metadata meta;
        model.emplace(ti::TimeIntegratorModel::load(ckpt, &meta));
        if (!(model->config() == tcfg))
            throw ConfigError("cannot resume from " + ckpt.string() + ": its integrator configuration differs");
        start = io::get_size(meta, "train.epochs_done");
        log() << "train-ti: resuming from epoch " << start << "\n";
    }
    else model.emplace(tcfg, derive_seed(cfg.seed, detail::kTiSeedTag, 0));

    ti::TiTrainConfig tc;
    tc.epochs = cfg.ti.epochs;
    tc.start_epoch = start;
    tc.unroll = cfg.ti.unroll;
    tc.lr = cfg.ti.lr * std::pow(cfg.ti.lr_decay, double(start));
    tc.seed = derive_seed(cfg.seed, detail::kTiSeedTag, 1);
    tc.schedule = {cfg.ti.schedule.warmup, cfg.ti.schedule.total, cfg.ti.schedule.eps_min};
    tc.loss = ti::parse_loss_space(cfg.ti.loss);
    tc.t_begin = begin;
    tc.t_end = end;
    tc.window_stride = cfg.ti.window_stride;
    tc.windows_per_epoch = cfg.ti.windows_per_epoch;
    tc.batch = cfg.ti.batch;
    tc.clip_norm = cfg.ti.clip_norm;
    tc.lr_decay = cfg.ti.lr_decay;

    if (ti::enumerate_windows(samples, tcfg.history, tc.unroll, begin, end, tc.window_stride).empty())
        throw ConfigError("no training windows of th + K = " + std::to_string(tcfg.history + tc.unroll) +
                          " frames fit the training window");

    fs::create_directories(layout.ti_write);
    const fs::path csv = layout.ti_write / "loss.csv";
    const bool append = start > 0 && fs::exists(csv);
    std::ofstream os(csv, append ? std::ios::app : std::ios::trunc);
    if (!append) os << "epoch,epsilon,loss,val_loss,lr,gt_fraction\n";
    os << std::setprecision(10);
    log() << "train-ti: " << samples.size() << " samples, th=" << tcfg.history << ", K=" << tc.unroll
          << ", W=" << tcfg.frame_width() << ", d_gamma=" << tcfg.d_gamma << "\n";

    const std::vector<const ae::AutoencoderModel*> decoders = aes.solution_ptrs();
    TiSummary s;
    s.first_epoch = start;
    s.report = ti::train_ti(*model, samples, tc, validation, decoded ? &decoders : nullptr, [&](const ti::TiEpoch& e) {
        os << e.epoch << "," << e.epsilon << "," << e.loss << "," << e.val_loss << "," << e.lr << "," << e.gt_fraction << "\n";
        os.flush();
        log() << "  epoch " << e.epoch << "  eps " << e.epsilon << "  loss " << e.loss;
        if (!validation.empty()) log() << "  val " << e.val_loss;
        log() << "\n";
    });
    if (s.report.diverged) log() << "train-ti: loss went non-finite, kept last good weights\n";
    const std::size_t done = start + s.report.curve.size();
    model->save(ckpt, {{"train.epochs_done", std::to_string(done)},
                       {"train.window", std::to_string(begin) + "," + std::to_string(end)},
                       {"train.seed", std::to_string(cfg.seed)}});
    s.seconds = clock.seconds();
    log() << "train-ti: " << s.report.steps << " optimiser steps, " << done << " epochs total (" << std::fixed
          << std::setprecision(1) << s.seconds << " s)" << std::defaultfloat << "\n";
    return s;
}

TiSummary cmd_train_ti(const ExperimentConfig& cfg) { return cmd_train_ti(cfg, Layout(cfg)); }

} // namespace cmls::pipeline
