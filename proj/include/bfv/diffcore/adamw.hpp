#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "bfv/diffcore/param_set.hpp"

namespace bfv::diff {

struct AdamWOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    AdamWOptions options;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::int64_t step = 0;
};

AdamWState adamw_init(const ParamSet& params, const AdamWOptions& options);

// One bias-corrected AdamW update, in place. Decoupled weight decay
// (p ← p − lr·wd·p) is applied only to parameters flagged for decay.
// Throws NumericError naming the parameter on a non-finite gradient.
void adamw_step(ParamSet& params, const Gradients& grads, AdamWState& state);

} // namespace bfv::diff
