#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bfv/diffcore/adamw.hpp"
#include "bfv/diffcore/graph.hpp"

namespace bfv::calib {

using diff::Index;
using diff::Tensor;

inline constexpr int kDefaultFlowSteps = 16;

// K steps of (fixed permutation, affine coupling). The first ceil(V/2)
// permuted coordinates condition the scale and shift applied to the rest.
struct FlowModel {
    Index dim = 0;
    int steps = 0;
    Index hidden = 0;
    std::vector<std::vector<std::uint32_t>> permutations;
    diff::ParamSet params;

    Index conditioner_dim() const { return (dim + 1) / 2; }
    Index transformed_dim() const { return dim / 2; }
};

// Coupling-net hidden width: max(2V, 64).
Index flow_hidden_width(Index dim);

// Parameter prefix of step k's coupling net ("step03").
std::string flow_step_prefix(int step);

// Uniform random permutations, coupling nets with zero-initialized output
// heads, so every fresh step is a pure permutation.
FlowModel flow_init(Index dim, int steps, std::uint64_t seed);

struct FlowOutput {
    Tensor z;
    Eigen::VectorXd log_det;
};

// Graph form used for training: returns z (B×V) and log|det J| (B×1).
struct FlowVars {
    diff::Var z;
    diff::Var log_det;
};
FlowVars flow_forward(diff::Graph& g, const FlowModel& model, diff::Var x);

FlowOutput flow_forward(const FlowModel& model, const Tensor& x);
Tensor flow_inverse(const FlowModel& model, const Tensor& z);

// Mean negative log-likelihood under a standard normal base density.
double flow_nll(const FlowModel& model, const Tensor& x);
diff::Var flow_nll(diff::Graph& g, const FlowModel& model, diff::Var x);

enum class LrSchedule { constant, cosine };

struct FlowTrainOptions {
    double lr = 1e-3;  // peak rate; cosine decays it to zero over the run
    LrSchedule schedule = LrSchedule::cosine;
    int epochs = 5;
    Index batch = 256;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
};

struct FlowTrainResult {
    FlowModel model;
    double initial_nll = 0.0;
    std::vector<double> epoch_nll;  // full-data NLL after each epoch
};

FlowTrainResult flow_train(FlowModel model, const Tensor& x, const FlowTrainOptions& options);

// BFVF: "BFVF", u32 version, u32 V, u32 K, then per step the permutation
// (V u32) followed by that step's parameters in name order, each as f32
// row-major.
void save_flow(const std::filesystem::path& path, const FlowModel& model);
FlowModel load_flow(const std::filesystem::path& path);

} // namespace bfv::calib
