#pragma once

#include "cmls/ti/model.hpp"

#include <functional>

namespace cmls::ti {

/// Teacher-forcing probability: 1 before `warmup`, then linear down to
/// `eps_min` at epoch `total`. Epochs outside [0, total] are clamped.
struct CurriculumSchedule {
    std::size_t warmup = 10;
    std::size_t total = 110;
    double eps_min = 0.0;

    double probability(std::size_t epoch) const;
    void validate() const;
    bool operator==(const CurriculumSchedule&) const = default;
};

double cl_probability(const CurriculumSchedule& s, std::size_t epoch);

enum class LossSpace { latent, decoded };
std::string to_string(LossSpace s);
LossSpace parse_loss_space(const std::string& text);

/// One pre-encoded training sample. frames[t] is [N, W] (solution columns
/// first). `patches[f][t]` holds normalised ground-truth patches
/// [N, 1, p..] of solution field f and is only needed for the decoded loss.
struct EncodedSample {
    Extents lattice;
    std::vector<nn::Tensor> frames;
    std::vector<std::vector<nn::Tensor>> patches;
};

/// History starts at t0: inputs t0 .. t0+th-1, targets t0+th .. t0+th+K-1.
struct Window {
    std::size_t sample = 0;
    std::size_t t0 = 0;
    bool operator==(const Window&) const = default;
};

struct TiTrainConfig {
    std::size_t epochs = 30;
    std::size_t start_epoch = 0;  // resume offset into the schedule and curve
    std::size_t unroll = 10;      // K
    double lr = 1e-3;
    std::uint64_t seed = 0;
    CurriculumSchedule schedule{};
    LossSpace loss = LossSpace::latent;
    std::size_t t_begin = 0;  // training time window [t_begin, t_end); t_end 0 = all
    std::size_t t_end = 0;
    std::size_t window_stride = 1;
    std::size_t windows_per_epoch = 0;  // random subset per epoch, 0 = all
    std::size_t batch = 8;              // windows per optimiser step
    double clip_norm = 0.0;             // 0 disables clipping
    double lr_decay = 1.0;              // multiplied into lr after every epoch
};

struct TiEpoch {
    std::size_t epoch = 0;
    double epsilon = 1.0;
    double loss = 0.0;      // mean window loss
    double val_loss = 0.0;  // free-running loss on validation windows (0 if none)
    double lr = 0.0;
    double gt_fraction = 1.0;  // share of coin flips that chose ground truth
};

struct TiTrainReport {
    std::vector<TiEpoch> curve;
    std::vector<std::uint8_t> decisions;  // 1 = ground truth, K-1 per window in draw order
    std::vector<Window> windows;          // windows in the order they were used
    std::size_t steps = 0;
    std::size_t best_epoch = 0;
    bool diverged = false;
};

/// Frozen solution decoders (roster order), needed for the decoded loss.
using DecoderSet = std::vector<const ae::AutoencoderModel*>;

std::vector<Window> enumerate_windows(const std::vector<EncodedSample>& samples, std::size_t history, std::size_t unroll,
                                      std::size_t t_begin, std::size_t t_end, std::size_t stride);

/// Sum over the K unrolled steps of the per-step MSE. `gt_inputs` holds K-1
/// flags per window: flag j chooses whether frame t0+th+j enters the history
/// as ground truth (1) or as the model's own prediction (0).
nn::Var window_loss(const TimeIntegratorModel& model, const std::vector<EncodedSample>& samples,
                    const std::vector<Window>& batch, const std::vector<std::uint8_t>& gt_inputs, std::size_t unroll,
                    LossSpace space = LossSpace::latent, const DecoderSet* decoders = nullptr);

/// One optimiser step per batch of windows. Validation windows (if any) are
/// scored free-running every epoch and the best parameters are kept.
TiTrainReport train_ti(TimeIntegratorModel& model, const std::vector<EncodedSample>& samples, const TiTrainConfig& cfg,
                       const std::vector<EncodedSample>& validation = {}, const DecoderSet* decoders = nullptr,
                       const std::function<void(const TiEpoch&)>& on_epoch = {});

} // namespace cmls::ti
