#include "bfv/calib/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "bfv/diffcore/layers.hpp"
#include "bfv/ingest/formats.hpp"

namespace bfv::calib {

using diff::Graph;
using diff::Var;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln 2π

struct StepNames {
    std::string block1, block2, head;
    explicit StepNames(int step)
    {
        const std::string p = flow_step_prefix(step);
        block1 = p + ".block1";
        block2 = p + ".block2";
        head = p + ".head";
    }
};

// Returns (s, t) for the conditioner half. s = 2·tanh(s_raw / 2).
std::pair<Var, Var> coupling_net(Graph& g, const FlowModel& model, int step, Var xa)
{
    const StepNames n(step);
    Var h = diff::mlp_block(g, model.params, n.block1, xa);
    h = diff::mlp_block(g, model.params, n.block2, h);
    Var out = diff::linear(g, model.params, n.head, h);
    const Index nb = model.transformed_dim();
    Var s_raw = g.slice_cols(out, 0, nb);
    Var t = g.slice_cols(out, nb, nb);
    Var s = g.scale(g.tanh(g.scale(s_raw, 0.5)), 2.0);
    return {s, t};
}

void check_step(const Tensor& v, int step, const char* direction)
{
    if (!v.allFinite())
        throw NumericError(std::string("flow ") + direction + ": non-finite value at step " +
                           std::to_string(step));
}

void check_input(const FlowModel& model, const Tensor& x, const char* what)
{
    if (x.cols() != model.dim)
        throw DimensionError(std::string(what) + ": expected width " + std::to_string(model.dim) +
                             ", got " + diff::shape_string(x));
    diff::require_finite(x, what);
}

} // namespace

Index flow_hidden_width(Index dim)
{
    return std::max<Index>(2 * dim, 64);
}

std::string flow_step_prefix(int step)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "step%02d", step);
    return buf;
}

FlowModel flow_init(Index dim, int steps, std::uint64_t seed)
{
    if (dim < 2)
        throw ContractError("flow_init: dimension must be at least 2");
    if (steps < 1)
        throw ContractError("flow_init: need at least one step");
    FlowModel model;
    model.dim = dim;
    model.steps = steps;
    model.hidden = flow_hidden_width(dim);
    std::mt19937_64 rng(seed);
    const Index na = model.conditioner_dim();
    const Index nb = model.transformed_dim();
    for (int k = 0; k < steps; ++k) {
        std::vector<std::uint32_t> perm(static_cast<std::size_t>(dim));
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        model.permutations.push_back(std::move(perm));
        const StepNames n(k);
        diff::add_mlp_block(model.params, n.block1, na, model.hidden, rng);
        diff::add_mlp_block(model.params, n.block2, model.hidden, model.hidden, rng);
        diff::add_linear(model.params, n.head, model.hidden, 2 * nb, rng, /*zero_init=*/true);
    }
    return model;
}

FlowVars flow_forward(Graph& g, const FlowModel& model, Var x)
{
    const Index na = model.conditioner_dim();
    const Index nb = model.transformed_dim();
    const Index batch = g.value(x).rows();
    Var log_det = g.constant(Tensor::Zero(batch, 1));
    Var h = x;
    for (int k = 0; k < model.steps; ++k) {
        Var xp = g.permute_cols(h, model.permutations[static_cast<std::size_t>(k)]);
        Var xa = g.slice_cols(xp, 0, na);
        Var xb = g.slice_cols(xp, na, nb);
        auto [s, t] = coupling_net(g, model, k, xa);
        Var yb = g.add(g.mul(xb, g.exp(s)), t);
        h = g.concat_cols(xa, yb);
        log_det = g.add(log_det, g.row_sum(s));
        check_step(g.value(h), k, "forward");
    }
    return {h, log_det};
}

FlowOutput flow_forward(const FlowModel& model, const Tensor& x)
{
    check_input(model, x, "flow_forward");
    Graph g(false);
    FlowVars out = flow_forward(g, model, g.constant(x));
    return {g.value(out.z), g.value(out.log_det).col(0)};
}

Tensor flow_inverse(const FlowModel& model, const Tensor& z)
{
    check_input(model, z, "flow_inverse");
    const Index na = model.conditioner_dim();
    const Index nb = model.transformed_dim();
    Tensor y = z;
    for (int k = model.steps - 1; k >= 0; --k) {
        Graph g(false);
        Var ya = g.constant(y.leftCols(na));
        auto [s, t] = coupling_net(g, model, k, ya);
        Tensor xp(y.rows(), model.dim);
        xp.leftCols(na) = y.leftCols(na);
        xp.rightCols(nb) =
            ((y.rightCols(nb) - g.value(t)).array() * (-g.value(s).array()).exp()).matrix();
        const auto& perm = model.permutations[static_cast<std::size_t>(k)];
        for (Index j = 0; j < model.dim; ++j)
            y.col(perm[static_cast<std::size_t>(j)]) = xp.col(j);
        check_step(y, k, "inverse");
    }
    return y;
}

Var flow_nll(Graph& g, const FlowModel& model, Var x)
{
    FlowVars out = flow_forward(g, model, x);
    const double v = static_cast<double>(model.dim);
    // −log N(z; 0, I) − log|det J| per sample, averaged.
    Var half_sq = g.scale(g.row_sum(g.square(out.z)), 0.5);
    Var per_sample = g.sub(g.add_scalar(half_sq, 0.5 * v * kLog2Pi), out.log_det);
    return g.mean(per_sample);
}

double flow_nll(const FlowModel& model, const Tensor& x)
{
    check_input(model, x, "flow_nll");
    const FlowOutput out = flow_forward(model, x);
    const double v = static_cast<double>(model.dim);
    const Eigen::ArrayXd per_sample =
        0.5 * (v * kLog2Pi + out.z.rowwise().squaredNorm().array()) - out.log_det.array();
    return per_sample.mean();
}

FlowTrainResult flow_train(FlowModel model, const Tensor& x, const FlowTrainOptions& options)
{
    check_input(model, x, "flow_train");
    const Index n = x.rows();
    if (options.batch < 1 || options.batch > n)
        throw ContractError("flow_train: need N >= batch >= 1");
    if (options.epochs < 0)
        throw ContractError("flow_train: epochs must be non-negative");

    FlowTrainResult result;
    result.initial_nll = flow_nll(model, x);
    if (options.epochs == 0) {
        result.model = std::move(model);
        return result;
    }

    diff::AdamWOptions opt;
    opt.lr = options.lr;
    opt.weight_decay = options.weight_decay;
    diff::AdamWState state = diff::adamw_init(model.params, opt);
    std::mt19937_64 rng(options.seed);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});

    const Index steps_per_epoch = (n + options.batch - 1) / options.batch;
    const double total_steps = static_cast<double>(steps_per_epoch * options.epochs);
    Index global_step = 0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        Index step = 0;
        for (Index start = 0; start < n; start += options.batch, ++step, ++global_step) {
            // A constant rate leaves the last iterate noisy enough to shift the
            // output moments visibly.
            if (options.schedule == LrSchedule::cosine)
                state.options.lr = options.lr * 0.5 *
                                   (1.0 + std::cos(M_PI * static_cast<double>(global_step) / total_steps));
            const Index count = std::min(options.batch, n - start);
            Tensor batch(count, model.dim);
            for (Index i = 0; i < count; ++i)
                batch.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
            Graph g;
            Var loss;
            try {
                loss = flow_nll(g, model, g.constant(std::move(batch)));
            } catch (const NumericError& e) {
                throw TrainingError("flow training diverged at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step) + ": " + e.what());
            }
            if (!std::isfinite(g.scalar(loss)))
                throw TrainingError("flow NLL is NaN at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step));
            diff::adamw_step(model.params, diff::backward(g, loss, model.params), state);
        }
        result.epoch_nll.push_back(flow_nll(model, x));
    }
    result.model = std::move(model);
    return result;
}

void save_flow(const std::filesystem::path& path, const FlowModel& model)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path.string());
    using namespace ingest::wire;
    put_magic(out, "BFVF");
    put_u32(out, ingest::kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(model.dim));
    put_u32(out, static_cast<std::uint32_t>(model.steps));
    for (int k = 0; k < model.steps; ++k) {
        for (auto p : model.permutations[static_cast<std::size_t>(k)])
            put_u32(out, p);
        const std::string prefix = flow_step_prefix(k) + ".";
        for (const auto& [name, p] : model.params)
            if (name.compare(0, prefix.size(), prefix) == 0)
                put_matrix(out, p.value);
    }
    if (!out)
        throw Error("write failed: " + path.string());
}

FlowModel load_flow(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open: " + path.string());
    using namespace ingest::wire;
    expect_magic(in, "BFVF");
    const Index dim = get_u32(in, "V");
    const int steps = static_cast<int>(get_u32(in, "K"));
    // Shapes come from a template model; its values are overwritten.
    FlowModel model = flow_init(dim, steps, 0);
    for (int k = 0; k < steps; ++k) {
        auto& perm = model.permutations[static_cast<std::size_t>(k)];
        std::vector<bool> seen(static_cast<std::size_t>(dim), false);
        for (auto& p : perm) {
            p = get_u32(in, "permutation");
            if (p >= dim || seen[p])
                throw FormatError(path.string() + ": step " + std::to_string(k) +
                                  " permutation is not a bijection");
            seen[p] = true;
        }
        const std::string prefix = flow_step_prefix(k) + ".";
        for (auto& [name, p] : model.params)
            if (name.compare(0, prefix.size(), prefix) == 0)
                p.value = get_matrix(in, p.value.rows(), p.value.cols(), name);
    }
    expect_eof(in, path.string());
    return model;
}

} // namespace bfv::calib
