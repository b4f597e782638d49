#pragma once

#include <random>
#include <string>

#include "bfv/diffcore/graph.hpp"

namespace bfv::diff {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kPReluInitSlope = 0.25;

// Names of the parameters owned by a block registered under `prefix`.
struct BlockNames {
    std::string weight, bias, ln_gain, ln_bias, prelu;
    explicit BlockNames(const std::string& prefix)
        : weight(prefix + ".weight"), bias(prefix + ".bias"), ln_gain(prefix + ".ln_gain"),
          ln_bias(prefix + ".ln_bias"), prelu(prefix + ".prelu")
    {
    }
};

// Registers a fully connected block (affine → LayerNorm → PReLU).
// Weights and bias use U(−1/√in, 1/√in); gain 1, ln bias 0, slope 0.25.
void add_mlp_block(ParamSet& params, const std::string& prefix, Index in, Index out,
                   std::mt19937_64& rng);

// Registers a plain affine head. zero_init sets weight and bias to zero.
void add_linear(ParamSet& params, const std::string& prefix, Index in, Index out,
                std::mt19937_64& rng, bool zero_init);

// y = PReLU(LayerNorm(xW + b) ⊙ gain + ln_bias)
Var mlp_block(Graph& g, Var x, Var weight, Var bias, Var ln_gain, Var ln_bias, Var prelu_slope);
Var mlp_block(Graph& g, const ParamSet& params, const std::string& prefix, Var x);

Var linear(Graph& g, const ParamSet& params, const std::string& prefix, Var x);

// Stand-alone evaluation of one block.
Tensor mlp_block_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                         const Tensor& ln_gain, const Tensor& ln_bias, double prelu_slope);

} // namespace bfv::diff
