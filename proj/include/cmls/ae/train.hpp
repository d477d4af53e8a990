#pragma once

#include "cmls/ae/autoencoder.hpp"

#include <functional>

namespace cmls::ae {

struct AeTrainConfig {
    std::size_t epochs = 30;
    std::size_t batch = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;      // held-out share of the patch set
    std::size_t max_steps = 0;      // optimiser step cap, 0 = none
    std::size_t plateau_patience = 5;  // epochs without improvement before lr halves
    double min_lr = 1e-5;
};

struct AeEpoch {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;
};

struct AeTrainReport {
    std::vector<AeEpoch> curve;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    std::size_t steps = 0;
    bool diverged = false;
};

/// Adam on reconstruction MSE over shuffled minibatches. After every epoch the
/// whole train and validation splits are evaluated; the parameters with the
/// lowest validation loss are kept. A non-finite loss or gradient restores
/// the last good parameters and stops training.
AeTrainReport train_autoencoder(AutoencoderModel& model, const nn::Tensor& patches, const AeTrainConfig& cfg,
                                const std::function<void(const AeEpoch&)>& on_epoch = {});

/// Mean squared reconstruction error and relative L2 error over a patch set.
struct ReconstructionError {
    double mse = 0.0;
    double rel_l2 = 0.0;
};
ReconstructionError reconstruction_error(const AutoencoderModel& model, const nn::Tensor& patches);

/// Rows [begin, end) of a batched tensor.
nn::Tensor take_rows(const nn::Tensor& t, std::size_t begin, std::size_t end);
nn::Tensor take_rows(const nn::Tensor& t, const std::vector<std::size_t>& rows);

} // namespace cmls::ae
