#include "cmls/ti/train.hpp"

#include "cmls/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

namespace cmls::ti {

using nn::Tensor;
using nn::Var;

double CurriculumSchedule::probability(std::size_t epoch) const
{
    const std::size_t e = std::min(epoch, total);
    if (e < warmup) return 1.0;
    if (total <= warmup || e == total) return eps_min;
    const double frac = double(e - warmup) / double(total - warmup);
    return 1.0 - frac * (1.0 - eps_min);
}

void CurriculumSchedule::validate() const
{
    if (!(eps_min >= 0.0 && eps_min < 1.0)) throw std::invalid_argument("eps_min must lie in [0, 1)");
    if (warmup > total) throw std::invalid_argument("curriculum warmup exceeds the total epoch count");
}

double cl_probability(const CurriculumSchedule& s, std::size_t epoch) { return s.probability(epoch); }

std::string to_string(LossSpace s) { return s == LossSpace::latent ? "latent" : "decoded"; }

LossSpace parse_loss_space(const std::string& text)
{
    if (text == "latent") return LossSpace::latent;
    if (text == "decoded") return LossSpace::decoded;
    throw std::invalid_argument("unknown loss space '" + text + "' (expected latent or decoded)");
}

namespace {

// Rows of frame t of every window in the batch, columns [col, col + width).
Tensor stack(const std::vector<EncodedSample>& samples, const std::vector<Window>& batch, std::size_t dt,
             std::size_t col, std::size_t width)
{
    const std::size_t n = samples[batch[0].sample].frames[0].dim(0);
    Tensor out({batch.size() * n, width});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor& f = samples[batch[b].sample].frames.at(batch[b].t0 + dt);
        const std::size_t w = f.dim(1);
        for (std::size_t i = 0; i < n; ++i)
            std::memcpy(out.data() + (b * n + i) * width, f.data() + i * w + col, width * sizeof(double));
    }
    return out;
}

Tensor stack_patches(const std::vector<EncodedSample>& samples, const std::vector<Window>& batch, std::size_t field,
                     std::size_t dt)
{
    const Tensor& first = samples[batch[0].sample].patches.at(field).at(batch[0].t0 + dt);
    nn::Shape s = first.shape();
    s[0] *= batch.size();
    Tensor out(s);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor& p = samples[batch[b].sample].patches.at(field).at(batch[b].t0 + dt);
        std::memcpy(out.data() + b * p.size(), p.data(), p.size() * sizeof(double));
    }
    return out;
}

} // namespace

std::vector<Window> enumerate_windows(const std::vector<EncodedSample>& samples, std::size_t history, std::size_t unroll,
                                      std::size_t t_begin, std::size_t t_end, std::size_t stride)
{
    if (stride == 0) throw std::invalid_argument("window stride must be >= 1");
    std::vector<Window> out;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const std::size_t end = t_end == 0 ? samples[s].frames.size() : std::min(t_end, samples[s].frames.size());
        for (std::size_t t0 = t_begin; t0 + history + unroll <= end; t0 += stride) out.push_back({s, t0});
    }
    return out;
}

Var window_loss(const TimeIntegratorModel& model, const std::vector<EncodedSample>& samples,
                const std::vector<Window>& batch, const std::vector<std::uint8_t>& gt_inputs, std::size_t unroll,
                LossSpace space, const DecoderSet* decoders)
{
    const auto& cfg = model.config();
    if (batch.empty()) throw std::invalid_argument("window_loss: empty batch");
    if (unroll == 0) throw std::invalid_argument("window_loss: K must be >= 1");
    if (gt_inputs.size() != batch.size() * (unroll - 1))
        throw std::invalid_argument("window_loss: expected " + std::to_string(batch.size() * (unroll - 1)) +
                                    " curriculum flags, got " + std::to_string(gt_inputs.size()));
    const Extents& lattice = samples[batch[0].sample].lattice;
    for (const auto& w : batch) {
        if (samples.at(w.sample).lattice != lattice) throw std::invalid_argument("window_loss: mixed lattices in a batch");
        if (w.t0 + cfg.history + unroll > samples[w.sample].frames.size())
            throw std::invalid_argument("window_loss: window at t0=" + std::to_string(w.t0) + " runs past the sample");
    }
    if (space == LossSpace::decoded && (!decoders || decoders->size() != cfg.solution.size()))
        throw std::invalid_argument("decoded loss needs one decoder per solution field");

    const std::size_t n = cell_count(lattice), rows = n * batch.size();
    const std::size_t ls = cfg.solution_width(), lc = cfg.condition_width(), th = cfg.history;
    const auto table = stacked_table(model.table(lattice), n, batch.size());

    std::vector<Var> gammas;
    for (std::size_t h = 0; h < th; ++h) gammas.push_back(model.gamma(Var(stack(samples, batch, h, 0, ls + lc)), table));
    Var latest(stack(samples, batch, th - 1, 0, ls));

    Var loss;
    for (std::size_t k = 0; k < unroll; ++k) {
        const Var pred = model.advance(gammas, latest);
        Var term;
        if (space == LossSpace::latent) {
            term = nn::mse(pred, Var(stack(samples, batch, th + k, 0, ls)));
        }
        else {
            std::size_t off = 0;
            for (std::size_t f = 0; f < cfg.solution.size(); ++f) {
                const auto* dec = (*decoders)[f];
                const Var x = dec->decode_batch(nn::slice_cols(pred, off, cfg.solution[f].latent));
                const Var t = nn::mse(x, Var(stack_patches(samples, batch, f, th + k)));
                term = term.defined() ? nn::add(term, t) : t;
                off += cfg.solution[f].latent;
            }
        }
        loss = loss.defined() ? nn::add(loss, term) : term;
        if (k + 1 == unroll) break;

        // Mix per window: ground-truth rows where the flag is set, predictions elsewhere.
        const Tensor gt = stack(samples, batch, th + k, 0, ls);
        bool all_gt = true, any_gt = false;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const bool g = gt_inputs[b * (unroll - 1) + k] != 0;
            all_gt = all_gt && g;
            any_gt = any_gt || g;
        }
        Var mixed;
        if (all_gt) {
            mixed = Var(gt);
        }
        else if (!any_gt) {
            mixed = pred;
        }
        else {
            Tensor keep({rows, ls}), fixed({rows, ls});
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const bool g = gt_inputs[b * (unroll - 1) + k] != 0;
                for (std::size_t i = b * n * ls; i < (b + 1) * n * ls; ++i) {
                    keep[i] = g ? 0.0 : 1.0;
                    fixed[i] = g ? gt[i] : 0.0;
                }
            }
            mixed = nn::add(nn::mul(pred, Var(keep)), Var(fixed));
        }
        const Var frame = lc ? nn::concat_cols({mixed, Var(stack(samples, batch, th + k, ls, lc))}) : mixed;
        gammas.erase(gammas.begin());
        gammas.push_back(model.gamma(frame, table));
        latest = mixed;
    }
    return loss;
}

TiTrainReport train_ti(TimeIntegratorModel& model, const std::vector<EncodedSample>& samples, const TiTrainConfig& cfg,
                       const std::vector<EncodedSample>& validation, const DecoderSet* decoders,
                       const std::function<void(const TiEpoch&)>& on_epoch)
{
    cfg.schedule.validate();
    if (cfg.batch == 0 || cfg.unroll == 0) throw std::invalid_argument("train_ti: batch and K must be positive");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("train_ti: lr must be positive");
    if (samples.empty()) throw std::invalid_argument("train_ti: no training samples");
    for (const auto& s : samples)
        for (const auto& f : s.frames)
            if (f.rank() != 2 || f.dim(1) != model.config().frame_width())
                throw std::invalid_argument("train_ti: encoded frame " + nn::shape_str(f.shape()) + " has width != " +
                                            std::to_string(model.config().frame_width()));

    auto windows = enumerate_windows(samples, model.config().history, cfg.unroll, cfg.t_begin, cfg.t_end,
                                     cfg.window_stride);
    if (windows.empty())
        throw std::invalid_argument("train_ti: no training window of th+K frames fits the time range");
    const auto val_windows = validation.empty() ? std::vector<Window>{}
                                                : enumerate_windows(validation, model.config().history, cfg.unroll,
                                                                    cfg.t_begin, cfg.t_end, cfg.unroll);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto params = model.parameters();
    nn::Adam opt(params, nn::AdamConfig{cfg.lr});
    auto last_good = nn::snapshot(params);
    auto best = last_good;
    double best_val = std::numeric_limits<double>::infinity();
    TiTrainReport report;

    for (std::size_t e = 0; e < cfg.epochs && !report.diverged; ++e) {
        const std::size_t epoch = cfg.start_epoch + e;
        const double eps = cfg.schedule.probability(epoch);
        std::shuffle(windows.begin(), windows.end(), rng);
        const std::size_t used = cfg.windows_per_epoch ? std::min(cfg.windows_per_epoch, windows.size()) : windows.size();

        double loss_sum = 0.0;
        std::size_t batches = 0, gt_count = 0, flips = 0;
        for (std::size_t b = 0; b < used; b += cfg.batch) {
            std::vector<Window> batch;
            for (std::size_t i = b; i < std::min(used, b + cfg.batch); ++i) batch.push_back(windows[i]);
            std::vector<std::uint8_t> flags;
            for (std::size_t w = 0; w < batch.size(); ++w)
                for (std::size_t k = 0; k + 1 < cfg.unroll; ++k) flags.push_back(coin(rng) < eps ? 1 : 0);
            report.decisions.insert(report.decisions.end(), flags.begin(), flags.end());
            report.windows.insert(report.windows.end(), batch.begin(), batch.end());
            for (auto f : flags) gt_count += f;
            flips += flags.size();

            const Var loss = window_loss(model, samples, batch, flags, cfg.unroll, cfg.loss, decoders);
            const double lv = loss.value()[0];
            if (!std::isfinite(lv)) {
                report.diverged = true;
                break;
            }
            opt.zero_grad();
            nn::backward(loss);
            if (cfg.clip_norm > 0.0) nn::clip_grad_norm(params, cfg.clip_norm);
            try {
                opt.step();
            }
            catch (const std::domain_error&) {
                report.diverged = true;
                break;
            }
            ++report.steps;
            loss_sum += lv;
            ++batches;
        }
        if (report.diverged) {
            nn::restore(params, last_good);
            break;
        }

        TiEpoch rec{epoch, eps, batches ? loss_sum / double(batches) : 0.0, 0.0, opt.config().lr,
                    flips ? double(gt_count) / double(flips) : 1.0};
        if (!val_windows.empty()) {
            nn::NoGradGuard guard;
            double v = 0.0;
            for (std::size_t b = 0; b < val_windows.size(); b += cfg.batch) {
                std::vector<Window> batch(val_windows.begin() + long(b),
                                          val_windows.begin() + long(std::min(val_windows.size(), b + cfg.batch)));
                const std::vector<std::uint8_t> none(batch.size() * (cfg.unroll - 1), 0);
                v += window_loss(model, validation, batch, none, cfg.unroll, cfg.loss, decoders).value()[0] *
                     double(batch.size());
            }
            rec.val_loss = v / double(val_windows.size());
            if (!std::isfinite(rec.val_loss)) {
                report.diverged = true;
                nn::restore(params, last_good);
                break;
            }
        }
        last_good = nn::snapshot(params);
        if (val_windows.empty() || rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = last_good;
            report.best_epoch = epoch;
        }
        report.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);
        opt.config().lr *= cfg.lr_decay;
    }
    if (!val_windows.empty() && !report.curve.empty()) nn::restore(params, best);
    return report;
}

} // namespace cmls::ti
