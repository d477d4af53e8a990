#include "cmls/ae/train.hpp"

#include "cmls/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

namespace cmls::ae {

using nn::Tensor;
using nn::Var;

Tensor take_rows(const Tensor& t, std::size_t begin, std::size_t end)
{
    nn::Shape s = t.shape();
    s[0] = end - begin;
    const std::size_t row = t.size() / t.dim(0);
    Tensor out(s);
    std::memcpy(out.data(), t.data() + begin * row, (end - begin) * row * sizeof(double));
    return out;
}

Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& rows)
{
    nn::Shape s = t.shape();
    s[0] = rows.size();
    const std::size_t row = t.size() / t.dim(0);
    Tensor out(s);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::memcpy(out.data() + i * row, t.data() + rows[i] * row, row * sizeof(double));
    return out;
}

ReconstructionError reconstruction_error(const AutoencoderModel& model, const Tensor& patches)
{
    nn::NoGradGuard guard;
    const std::size_t n = patches.dim(0);
    double err = 0.0, ref = 0.0;
    for (std::size_t b = 0; b < n; b += 1024) {
        const Tensor x = take_rows(patches, b, std::min(n, b + 1024));
        const Var y = model.decode_batch(model.encode_batch(Var(x)));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = y.value()[i] - x[i];
            err += e * e;
            ref += x[i] * x[i];
        }
    }
    return {err / double(patches.size()), ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err)};
}

AeTrainReport train_autoencoder(AutoencoderModel& model, const Tensor& patches, const AeTrainConfig& cfg,
                                const std::function<void(const AeEpoch&)>& on_epoch)
{
    if (patches.rank() < 2 || patches.dim(0) == 0) throw std::invalid_argument("train_autoencoder: empty patch set");
    if (cfg.batch == 0 || cfg.epochs == 0) throw std::invalid_argument("train_autoencoder: batch and epochs must be positive");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("train_autoencoder: lr must be positive");
    if (cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0)
        throw std::invalid_argument("train_autoencoder: val_fraction must lie in [0, 1)");

    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = patches.dim(0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_val = std::size_t(std::floor(cfg.val_fraction * double(n)));
    const Tensor val =
        n_val ? take_rows(patches, std::vector<std::size_t>(order.begin(), order.begin() + n_val)) : Tensor{};
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    const Tensor train = take_rows(patches, train_idx);
    const std::size_t n_train = train.dim(0);

    auto params = model.parameters();
    nn::Adam opt(params, nn::AdamConfig{cfg.lr});
    AeTrainReport report;
    auto best = nn::snapshot(params);
    auto last_good = best;
    report.best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> perm(n_train);
    std::iota(perm.begin(), perm.end(), 0);
    bool stop = false;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t b = 0; b < n_train && !stop; b += cfg.batch) {
            const std::vector<std::size_t> rows(perm.begin() + b, perm.begin() + std::min(n_train, b + cfg.batch));
            const Var x(take_rows(train, rows));
            const Var loss = nn::mse(model.decode_batch(model.encode_batch(x)), x);
            if (!std::isfinite(loss.value()[0])) {
                report.diverged = true;
                break;
            }
            opt.zero_grad();
            nn::backward(loss);
            try {
                opt.step();
            }
            catch (const std::domain_error&) {
                report.diverged = true;
                break;
            }
            ++report.steps;
            if (cfg.max_steps && report.steps >= cfg.max_steps) stop = true;
        }
        if (report.diverged) {
            nn::restore(params, last_good);
            break;
        }

        AeEpoch e{epoch, reconstruction_error(model, train).mse, 0.0, opt.config().lr};
        e.val_mse = n_val ? reconstruction_error(model, val).mse : e.train_mse;
        if (!std::isfinite(e.train_mse) || !std::isfinite(e.val_mse)) {
            report.diverged = true;
            nn::restore(params, last_good);
            break;
        }
        last_good = nn::snapshot(params);
        report.curve.push_back(e);
        if (on_epoch) on_epoch(e);

        if (e.val_mse < report.best_val) {
            report.best_val = e.val_mse;
            report.best_epoch = epoch;
            best = last_good;
            since_best = 0;
        }
        else if (++since_best >= cfg.plateau_patience) {
            opt.config().lr = std::max(cfg.min_lr, opt.config().lr * 0.5);
            since_best = 0;
        }
    }
    if (!report.curve.empty()) nn::restore(params, best);
    return report;
}

} // namespace cmls::ae
