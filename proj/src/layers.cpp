#include "bfv/diffcore/layers.hpp"

#include <cmath>

namespace bfv::diff {

namespace {

Tensor uniform(Index rows, Index cols, double bound, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(rows, cols);
    // Fill in row-major order so the draw sequence is layout independent.
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            t(r, c) = dist(rng);
    return t;
}

} // namespace

void add_mlp_block(ParamSet& params, const std::string& prefix, Index in, Index out,
                   std::mt19937_64& rng)
{
    const BlockNames n(prefix);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    params.add(n.weight, uniform(in, out, bound, rng), true);
    params.add(n.bias, uniform(1, out, bound, rng), false);
    params.add(n.ln_gain, Tensor::Ones(1, out), false);
    params.add(n.ln_bias, Tensor::Zero(1, out), false);
    params.add(n.prelu, Tensor::Constant(1, 1, kPReluInitSlope), false);
}

void add_linear(ParamSet& params, const std::string& prefix, Index in, Index out,
                std::mt19937_64& rng, bool zero_init)
{
    const BlockNames n(prefix);
    if (zero_init) {
        params.add(n.weight, Tensor::Zero(in, out), true);
        params.add(n.bias, Tensor::Zero(1, out), false);
        return;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    params.add(n.weight, uniform(in, out, bound, rng), true);
    params.add(n.bias, uniform(1, out, bound, rng), false);
}

Var mlp_block(Graph& g, Var x, Var weight, Var bias, Var ln_gain, Var ln_bias, Var prelu_slope)
{
    Var h = g.add_row(g.matmul(x, weight), bias);
    h = g.layer_norm(h, kLayerNormEps);
    h = g.add_row(g.mul_row(h, ln_gain), ln_bias);
    return g.prelu(h, prelu_slope);
}

Var mlp_block(Graph& g, const ParamSet& params, const std::string& prefix, Var x)
{
    const BlockNames n(prefix);
    return mlp_block(g, x, g.parameter(params, n.weight), g.parameter(params, n.bias),
                     g.parameter(params, n.ln_gain), g.parameter(params, n.ln_bias),
                     g.parameter(params, n.prelu));
}

Var linear(Graph& g, const ParamSet& params, const std::string& prefix, Var x)
{
    const BlockNames n(prefix);
    return g.add_row(g.matmul(x, g.parameter(params, n.weight)), g.parameter(params, n.bias));
}

Tensor mlp_block_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                         const Tensor& ln_gain, const Tensor& ln_bias, double prelu_slope)
{
    require_finite(x, "mlp_block_forward input");
    if (weight.rows() != x.cols())
        throw DimensionError("mlp_block_forward: input " + shape_string(x) + " vs weight " +
                             shape_string(weight));
    const Index out = weight.cols();
    require_shape(bias, 1, out, "mlp_block_forward bias");
    require_shape(ln_gain, 1, out, "mlp_block_forward ln_gain");
    require_shape(ln_bias, 1, out, "mlp_block_forward ln_bias");
    Graph g;
    Var y = mlp_block(g, g.constant(x), g.constant(weight), g.constant(bias), g.constant(ln_gain),
                      g.constant(ln_bias), g.constant(Tensor::Constant(1, 1, prelu_slope)));
    return g.value(y);
}

} // namespace bfv::diff
