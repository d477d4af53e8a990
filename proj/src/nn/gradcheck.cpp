#include "cmls/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmls::nn {

double grad_check(const ParameterRefs& params, const std::function<Var()>& loss, GradCheckOptions options)
{
    if (!(options.h > 0.0 && options.h <= 1e-2)) throw std::invalid_argument("grad_check: h must be in (0, 1e-2]");

    zero_grad(params);
    backward(loss());
    std::vector<Tensor> analytic;
    for (auto* p : params) analytic.push_back(p->grad());

    std::vector<std::pair<std::size_t, std::size_t>> entries;
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t j = 0; j < params[i]->value().size(); ++j) entries.emplace_back(i, j);
    if (entries.size() > options.max_samples) {
        Rng rng(options.seed);
        std::shuffle(entries.begin(), entries.end(), rng);
        entries.resize(options.max_samples);
    }

    NoGradGuard no_grad;
    double worst = 0.0;
    for (auto [i, j] : entries) {
        double& w = params[i]->mutable_value()[j];
        const double saved = w;
        w = saved + options.h;
        const double up = loss().value()[0];
        w = saved - options.h;
        const double down = loss().value()[0];
        w = saved;
        const double cd = (up - down) / (2.0 * options.h);
        const double a = analytic[i][j];
        const double rel = std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace cmls::nn
