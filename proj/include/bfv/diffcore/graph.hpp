#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bfv/diffcore/param_set.hpp"
#include "bfv/diffcore/tensor.hpp"

namespace bfv::diff {

// Handle to a node on a Graph tape.
struct Var {
    std::size_t id = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep over the tape is a valid topological order and the recorded
// computation is acyclic by construction.
//
// A graph is built for one forward pass, differentiated once, then thrown
// away. It is not thread-safe; use one graph per thread.
class Graph {
public:
    Graph() = default;
    // An untracked graph binds parameters as constants (inference only).
    explicit Graph(bool track_gradients) : track_(track_gradients) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    // Leaves.
    Var constant(Tensor value);
    Var variable(Tensor value);  // leaf that receives a gradient
    Var parameter(const ParamSet& params, const std::string& name);

    // Linear algebra.
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var add_row(Var x, Var row);    // x + broadcast 1×n row
    Var mul_row(Var x, Var row);    // x ⊙ broadcast 1×n row
    Var scale(Var x, double c);
    Var add_scalar(Var x, double c);

    // Elementwise nonlinearities.
    Var exp(Var x);
    Var log(Var x);
    Var tanh(Var x);
    Var sigmoid(Var x);
    Var log_sigmoid(Var x);
    Var square(Var x);
    Var prelu(Var x, Var slope);  // slope is 1×1

    // Row-wise normalization to zero mean and unit (population) variance.
    // Rows with variance below eps are treated as constant and map to zero.
    Var layer_norm(Var x, double eps);

    // Column manipulation.
    Var slice_cols(Var x, Index start, Index count);
    Var concat_cols(Var a, Var b);
    Var permute_cols(Var x, std::span<const std::uint32_t> perm);  // out[:, j] = x[:, perm[j]]

    // Reductions.
    Var sum(Var x);      // 1×1
    Var mean(Var x);     // 1×1
    Var row_sum(Var x);  // B×1

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Reverse sweep from a 1×1 node. Gradients are available through grad()
    // and gradients() afterwards.
    void backward(Var loss);
    const Tensor& grad(Var v) const;

    // ∂loss/∂p for every parameter in params; parameters not bound on this
    // graph get zero gradients.
    Gradients gradients(const ParamSet& params) const;

private:
    using Pullback = std::function<void(Graph&, std::size_t)>;

    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> parents;
        Pullback pullback;
        bool requires_grad = false;
        std::string param_name;
    };

    Var push(Tensor value, std::vector<std::size_t> parents, Pullback pullback);
    void accumulate(std::size_t id, const Tensor& contribution);
    template <typename Expr>
    void accumulate_expr(std::size_t id, const Expr& contribution);
    bool needs(std::size_t id) const { return nodes_[id].requires_grad; }
    const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    bool differentiated_ = false;
    bool track_ = true;
};

// Gradient of a scalar loss with respect to every parameter.
Gradients backward(Graph& graph, Var loss, const ParamSet& params);

} // namespace bfv::diff
