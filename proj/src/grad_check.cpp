#include "bfv/diffcore/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace bfv::diff {

namespace {

void check_step(double h)
{
    if (!(h >= 1e-7 && h <= 1e-3))
        throw ContractError("numeric_grad_check: step must lie in [1e-7, 1e-3]");
}

double rel_err(double analytic, double numeric)
{
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double probe(const std::function<double()>& eval)
{
    const double v = eval();
    if (!std::isfinite(v))
        throw NumericError("numeric_grad_check: non-finite loss at probe point");
    return v;
}

} // namespace

double numeric_grad_check(const InputLoss& f, const Tensor& x, double h)
{
    check_step(h);
    Graph g;
    Var xv = g.variable(x);
    Var loss = f(g, xv);
    g.backward(loss);
    Tensor analytic = g.grad(xv);
    if (analytic.size() == 0)
        analytic = Tensor::Zero(x.rows(), x.cols());

    auto eval_at = [&](const Tensor& point) {
        Graph pg;
        return pg.scalar(f(pg, pg.variable(point)));
    };

    double worst = 0.0;
    Tensor point = x;
    for (Index i = 0; i < x.size(); ++i) {
        const double orig = point.data()[i];
        point.data()[i] = orig + h;
        const double up = probe([&] { return eval_at(point); });
        point.data()[i] = orig - h;
        const double down = probe([&] { return eval_at(point); });
        point.data()[i] = orig;
        worst = std::max(worst, rel_err(analytic.data()[i], (up - down) / (2.0 * h)));
    }
    return worst;
}

double numeric_grad_check(const ParamLoss& f, const ParamSet& params, double h)
{
    check_step(h);
    Graph g;
    Var loss = f(g, params);
    const Gradients analytic = backward(g, loss, params);

    auto eval_at = [&](const ParamSet& p) {
        Graph pg;
        return pg.scalar(f(pg, p));
    };

    double worst = 0.0;
    ParamSet probe_params = params;
    for (auto& [name, p] : probe_params) {
        const Tensor& a = analytic.at(name);
        for (Index i = 0; i < p.value.size(); ++i) {
            const double orig = p.value.data()[i];
            p.value.data()[i] = orig + h;
            const double up = probe([&] { return eval_at(probe_params); });
            p.value.data()[i] = orig - h;
            const double down = probe([&] { return eval_at(probe_params); });
            p.value.data()[i] = orig;
            worst = std::max(worst, rel_err(a.data()[i], (up - down) / (2.0 * h)));
        }
    }
    return worst;
}

} // namespace bfv::diff
