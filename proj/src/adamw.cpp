#include "bfv/diffcore/adamw.hpp"

#include <cmath>

namespace bfv::diff {

AdamWState adamw_init(const ParamSet& params, const AdamWOptions& options)
{
    if (!(options.lr > 0.0))
        throw ContractError("AdamW learning rate must be positive");
    AdamWState state;
    state.options = options;
    for (const auto& [name, p] : params) {
        state.m.emplace(name, Tensor::Zero(p.value.rows(), p.value.cols()));
        state.v.emplace(name, Tensor::Zero(p.value.rows(), p.value.cols()));
    }
    return state;
}

void adamw_step(ParamSet& params, const Gradients& grads, AdamWState& state)
{
    const AdamWOptions& o = state.options;
    if (!(o.lr > 0.0))
        throw ContractError("AdamW learning rate must be positive");
    if (grads.size() != params.size())
        throw ContractError("AdamW: gradient count does not match parameter count");
    // Validate everything before mutating anything.
    for (const auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end())
            throw ContractError("AdamW: missing gradient for " + name);
        require_shape(it->second, p.value.rows(), p.value.cols(), "AdamW gradient " + name);
        if (!all_finite(it->second))
            throw NumericError("AdamW: non-finite gradient for parameter " + name);
        if (state.m.count(name) == 0 || state.v.count(name) == 0)
            throw ContractError("AdamW: no optimizer state for " + name);
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(o.beta1, t);
    const double bc2 = 1.0 - std::pow(o.beta2, t);

    for (auto& [name, p] : params) {
        const Tensor& g = grads.at(name);
        Tensor& m = state.m.at(name);
        Tensor& v = state.v.at(name);
        if (p.decay && o.weight_decay != 0.0)
            p.value *= 1.0 - o.lr * o.weight_decay;
        m = o.beta1 * m + (1.0 - o.beta1) * g;
        v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseAbs2();
        p.value.array() -= o.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + o.eps);
    }
}

} // namespace bfv::diff
