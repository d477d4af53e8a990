#pragma once

#include "cmls/nn/layers.hpp"

#include <cstdint>
#include <functional>

namespace cmls::nn {

struct GradCheckOptions {
    double h = 1e-5;
    std::size_t max_samples = 64;  // parameter entries probed, drawn uniformly
    std::uint64_t seed = 0;
};

/// Max over sampled parameter entries of
///   |analytic - central difference| / max(|analytic|, |cd|, 1e-8).
/// `loss` must rebuild the forward pass (including any probe input) each call.
double grad_check(const ParameterRefs& params, const std::function<Var()>& loss, GradCheckOptions options = {});

} // namespace cmls::nn
