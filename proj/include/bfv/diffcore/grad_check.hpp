#pragma once

#include <functional>

#include "bfv/diffcore/graph.hpp"

namespace bfv::diff {

// Builds a scalar loss on g from the leaf x.
using InputLoss = std::function<Var(Graph& g, Var x)>;
// Builds a scalar loss on g from parameters bound with g.parameter().
using ParamLoss = std::function<Var(Graph& g, const ParamSet& params)>;

// Compares the tape gradient with central differences
// (f(x+h) − f(x−h)) / 2h, elementwise. Returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-8).
double numeric_grad_check(const InputLoss& f, const Tensor& x, double h = 1e-5);
double numeric_grad_check(const ParamLoss& f, const ParamSet& params, double h = 1e-5);

} // namespace bfv::diff
