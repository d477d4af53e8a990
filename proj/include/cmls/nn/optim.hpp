#pragma once

#include "cmls/nn/layers.hpp"

#include <cstdint>

namespace cmls::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are owned here and keyed by the
/// position of each parameter in the list given at construction.
class Adam {
public:
    Adam(ParameterRefs params, AdamConfig config = {});

    /// Throws std::domain_error naming the parameter if any gradient entry is
    /// non-finite; in that case nothing is updated.
    void step();
    void zero_grad() { nn::zero_grad(params_); }

    std::uint64_t steps() const { return steps_; }
    AdamConfig& config() { return config_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    ParameterRefs params_;
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t steps_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const ParameterRefs& params, double max_norm);

} // namespace cmls::nn
