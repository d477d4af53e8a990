#include "cmls/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cmls::nn {

Adam::Adam(ParameterRefs params, AdamConfig config) : params_(std::move(params)), config_(config)
{
    if (!(config_.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
    for (auto* p : params_) {
        m_.emplace_back(p->value().shape());
        v_.emplace_back(p->value().shape());
    }
}

void Adam::step()
{
    for (auto* p : params_)
        if (!p->grad().all_finite()) throw std::domain_error("adam: non-finite gradient in parameter " + p->id());

    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        double* w = params_[i]->mutable_value().data();
        const double* g = params_[i]->grad().data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        for (std::size_t j = 0; j < m_[i].size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            w[j] -= config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
        }
    }
}

double clip_grad_norm(const ParameterRefs& params, double max_norm)
{
    double sq = 0.0;
    for (auto* p : params)
        for (double g : p->grad().values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (auto* p : params)
            for (double& g : p->grad().values()) g *= f;
    }
    return norm;
}

} // namespace cmls::nn
