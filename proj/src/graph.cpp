#include "bfv/diffcore/graph.hpp"

#include <cmath>

namespace bfv::diff {

namespace {

double stable_log_sigmoid(double x)
{
    return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
}

double stable_sigmoid(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                             shape_string(b));
}

void require_row(const Tensor& x, const Tensor& row, const char* op)
{
    if (row.rows() != 1 || row.cols() != x.cols())
        throw DimensionError(std::string(op) + ": expected 1x" + std::to_string(x.cols()) +
                             " row, got " + shape_string(row));
}

} // namespace

Var Graph::push(Tensor value, std::vector<std::size_t> parents, Pullback pullback)
{
    Node node;
    node.value = std::move(value);
    for (auto p : parents)
        node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
    node.parents = std::move(parents);
    if (node.requires_grad)
        node.pullback = std::move(pullback);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

void Graph::accumulate(std::size_t id, const Tensor& contribution)
{
    accumulate_expr(id, contribution);
}

template <typename Expr>
void Graph::accumulate_expr(std::size_t id, const Expr& contribution)
{
    Node& node = nodes_[id];
    if (!node.requires_grad)
        return;
    if (node.grad.size() == 0)
        node.grad = contribution;
    else
        node.grad += contribution;
}

Var Graph::constant(Tensor value)
{
    return push(std::move(value), {}, {});
}

Var Graph::variable(Tensor value)
{
    Var v = push(std::move(value), {}, {});
    nodes_[v.id].requires_grad = true;
    return v;
}

Var Graph::parameter(const ParamSet& params, const std::string& name)
{
    if (!track_)
        return constant(params.value(name));
    Var v = variable(params.value(name));
    nodes_[v.id].param_name = name;
    return v;
}

Var Graph::matmul(Var a, Var b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows())
        throw DimensionError("matmul: " + shape_string(A) + " * " + shape_string(B));
    Tensor out = A * B;
    return push(std::move(out), {a.id, b.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const std::size_t ia = n.parents[0], ib = n.parents[1];
        if (g.needs(ia))
            g.accumulate(ia, n.grad * g.nodes_[ib].value.transpose());
        if (g.needs(ib))
            g.accumulate(ib, g.nodes_[ia].value.transpose() * n.grad);
    });
}

Var Graph::add(Var a, Var b)
{
    require_same_shape(value(a), value(b), "add");
    return push(value(a) + value(b), {a.id, b.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate(n.parents[0], n.grad);
        g.accumulate(n.parents[1], n.grad);
    });
}

Var Graph::sub(Var a, Var b)
{
    require_same_shape(value(a), value(b), "sub");
    return push(value(a) - value(b), {a.id, b.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate(n.parents[0], n.grad);
        g.accumulate_expr(n.parents[1], -n.grad);
    });
}

Var Graph::mul(Var a, Var b)
{
    require_same_shape(value(a), value(b), "mul");
    Tensor out = value(a).cwiseProduct(value(b));
    return push(std::move(out), {a.id, b.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const std::size_t ia = n.parents[0], ib = n.parents[1];
        if (g.needs(ia))
            g.accumulate_expr(ia, n.grad.cwiseProduct(g.nodes_[ib].value));
        if (g.needs(ib))
            g.accumulate_expr(ib, n.grad.cwiseProduct(g.nodes_[ia].value));
    });
}

Var Graph::add_row(Var x, Var row)
{
    require_row(value(x), value(row), "add_row");
    Tensor out = value(x).rowwise() + value(row).row(0);
    return push(std::move(out), {x.id, row.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate(n.parents[0], n.grad);
        if (g.needs(n.parents[1]))
            g.accumulate_expr(n.parents[1], n.grad.colwise().sum());
    });
}

Var Graph::mul_row(Var x, Var row)
{
    require_row(value(x), value(row), "mul_row");
    Tensor out = value(x).array().rowwise() * value(row).row(0).array();
    return push(std::move(out), {x.id, row.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const std::size_t ix = n.parents[0], ir = n.parents[1];
        if (g.needs(ix))
            g.accumulate_expr(ix, (n.grad.array().rowwise() * g.nodes_[ir].value.row(0).array())
                                      .matrix());
        if (g.needs(ir))
            g.accumulate_expr(ir, n.grad.cwiseProduct(g.nodes_[ix].value).colwise().sum());
    });
}

Var Graph::scale(Var x, double c)
{
    return push(value(x) * c, {x.id}, [c](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate_expr(n.parents[0], n.grad * c);
    });
}

Var Graph::add_scalar(Var x, double c)
{
    Tensor out = value(x).array() + c;
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate(n.parents[0], n.grad);
    });
}

Var Graph::exp(Var x)
{
    Tensor out = value(x).array().exp();
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate_expr(n.parents[0], n.grad.cwiseProduct(n.value));
    });
}

Var Graph::log(Var x)
{
    Tensor out = value(x).array().log();
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate_expr(n.parents[0], n.grad.cwiseQuotient(g.nodes_[n.parents[0]].value));
    });
}

Var Graph::tanh(Var x)
{
    Tensor out = value(x).array().tanh();
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate_expr(n.parents[0],
                          (n.grad.array() * (1.0 - n.value.array().square())).matrix());
    });
}

Var Graph::sigmoid(Var x)
{
    Tensor out = value(x).unaryExpr(&stable_sigmoid);
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate_expr(n.parents[0],
                          (n.grad.array() * n.value.array() * (1.0 - n.value.array())).matrix());
    });
}

Var Graph::log_sigmoid(Var x)
{
    Tensor out = value(x).unaryExpr(&stable_log_sigmoid);
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        // d/dx log σ(x) = σ(−x)
        const Tensor& in = g.nodes_[n.parents[0]].value;
        g.accumulate_expr(n.parents[0],
                          n.grad.cwiseProduct(in.unaryExpr([](double v) { return stable_sigmoid(-v); })));
    });
}

Var Graph::square(Var x)
{
    Tensor out = value(x).array().square();
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        g.accumulate_expr(n.parents[0], 2.0 * n.grad.cwiseProduct(g.nodes_[n.parents[0]].value));
    });
}

Var Graph::prelu(Var x, Var slope)
{
    require_shape(value(slope), 1, 1, "prelu slope");
    const double a = value(slope)(0, 0);
    Tensor out = value(x).unaryExpr([a](double v) { return v >= 0.0 ? v : a * v; });
    return push(std::move(out), {x.id, slope.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const Tensor& in = g.nodes_[n.parents[0]].value;
        const double a = g.nodes_[n.parents[1]].value(0, 0);
        if (g.needs(n.parents[0]))
            g.accumulate_expr(n.parents[0],
                              n.grad.cwiseProduct(in.unaryExpr([a](double v) { return v >= 0.0 ? 1.0 : a; })));
        if (g.needs(n.parents[1])) {
            const double da =
                n.grad.cwiseProduct(in.unaryExpr([](double v) { return v >= 0.0 ? 0.0 : v; })).sum();
            g.accumulate(n.parents[1], Tensor::Constant(1, 1, da));
        }
    });
}

Var Graph::layer_norm(Var x, double eps)
{
    const Tensor& in = value(x);
    const Index cols = in.cols();
    Tensor out(in.rows(), cols);
    Eigen::VectorXd inv_std(in.rows());
    for (Index r = 0; r < in.rows(); ++r) {
        const double mu = in.row(r).mean();
        const double var = (in.row(r).array() - mu).square().sum() / static_cast<double>(cols);
        if (var < eps) {
            out.row(r).setZero();
            inv_std(r) = 0.0;
        } else {
            inv_std(r) = 1.0 / std::sqrt(var);
            out.row(r) = (in.row(r).array() - mu) * inv_std(r);
        }
    }
    return push(std::move(out), {x.id}, [inv_std](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const Tensor& y = n.value;
        const Tensor& gy = n.grad;
        Tensor dx(y.rows(), y.cols());
        for (Index r = 0; r < y.rows(); ++r) {
            if (inv_std(r) == 0.0) {
                dx.row(r).setZero();
                continue;
            }
            const double mean_g = gy.row(r).mean();
            const double mean_gy = gy.row(r).cwiseProduct(y.row(r)).mean();
            dx.row(r) = inv_std(r) * (gy.row(r).array() - mean_g - y.row(r).array() * mean_gy);
        }
        g.accumulate(n.parents[0], dx);
    });
}

Var Graph::slice_cols(Var x, Index start, Index count)
{
    const Tensor& in = value(x);
    if (start < 0 || count < 0 || start + count > in.cols())
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") out of " + shape_string(in));
    Tensor out = in.middleCols(start, count);
    const Index total = in.cols();
    return push(std::move(out), {x.id}, [start, count, total](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        Tensor dx = Tensor::Zero(n.grad.rows(), total);
        dx.middleCols(start, count) = n.grad;
        g.accumulate(n.parents[0], dx);
    });
}

Var Graph::concat_cols(Var a, Var b)
{
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows() != B.rows())
        throw DimensionError("concat_cols: " + shape_string(A) + " | " + shape_string(B));
    Tensor out(A.rows(), A.cols() + B.cols());
    out << A, B;
    const Index split = A.cols();
    return push(std::move(out), {a.id, b.id}, [split](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        if (g.needs(n.parents[0]))
            g.accumulate_expr(n.parents[0], n.grad.leftCols(split));
        if (g.needs(n.parents[1]))
            g.accumulate_expr(n.parents[1], n.grad.rightCols(n.grad.cols() - split));
    });
}

Var Graph::permute_cols(Var x, std::span<const std::uint32_t> perm)
{
    const Tensor& in = value(x);
    if (static_cast<Index>(perm.size()) != in.cols())
        throw DimensionError("permute_cols: permutation of size " + std::to_string(perm.size()) +
                             " for " + shape_string(in));
    Tensor out(in.rows(), in.cols());
    for (Index j = 0; j < in.cols(); ++j) {
        if (perm[j] >= static_cast<std::uint32_t>(in.cols()))
            throw DimensionError("permute_cols: index out of range");
        out.col(j) = in.col(perm[j]);
    }
    std::vector<std::uint32_t> p(perm.begin(), perm.end());
    return push(std::move(out), {x.id}, [p = std::move(p)](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        Tensor dx = Tensor::Zero(n.grad.rows(), n.grad.cols());
        for (Index j = 0; j < n.grad.cols(); ++j)
            dx.col(p[j]) += n.grad.col(j);
        g.accumulate(n.parents[0], dx);
    });
}

Var Graph::sum(Var x)
{
    Tensor out = Tensor::Constant(1, 1, value(x).sum());
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const Tensor& in = g.nodes_[n.parents[0]].value;
        g.accumulate_expr(n.parents[0], Tensor::Constant(in.rows(), in.cols(), n.grad(0, 0)));
    });
}

Var Graph::mean(Var x)
{
    const double count = static_cast<double>(value(x).size());
    if (count == 0)
        throw DimensionError("mean of empty tensor");
    Tensor out = Tensor::Constant(1, 1, value(x).sum() / count);
    return push(std::move(out), {x.id}, [count](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const Tensor& in = g.nodes_[n.parents[0]].value;
        g.accumulate_expr(n.parents[0],
                          Tensor::Constant(in.rows(), in.cols(), n.grad(0, 0) / count));
    });
}

Var Graph::row_sum(Var x)
{
    Tensor out = value(x).rowwise().sum();
    return push(std::move(out), {x.id}, [](Graph& g, std::size_t self) {
        const auto& n = g.nodes_[self];
        const Index cols = g.nodes_[n.parents[0]].value.cols();
        g.accumulate_expr(n.parents[0], n.grad.replicate(1, cols));
    });
}

double Graph::scalar(Var v) const
{
    const Tensor& t = value(v);
    if (t.rows() != 1 || t.cols() != 1)
        throw ContractError("scalar(): node is " + shape_string(t));
    return t(0, 0);
}

void Graph::backward(Var loss)
{
    if (loss.id >= nodes_.size())
        throw InternalError("backward: unknown node");
    const Tensor& out = nodes_[loss.id].value;
    if (out.rows() != 1 || out.cols() != 1)
        throw ContractError("backward: loss must be scalar, got " + shape_string(out));
    if (differentiated_)
        for (auto& n : nodes_)
            n.grad.resize(0, 0);
    differentiated_ = true;
    if (!nodes_[loss.id].requires_grad)
        return;
    nodes_[loss.id].grad = Tensor::Ones(1, 1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.size() == 0 || !n.pullback)
            continue;
        for (auto p : n.parents)
            if (p >= i)
                throw InternalError("backward: tape is not topologically ordered");
        n.pullback(*this, i);
    }
}

const Tensor& Graph::grad(Var v) const
{
    static const Tensor empty;
    const Node& n = nodes_.at(v.id);
    return n.grad.size() == 0 ? empty : n.grad;
}

Gradients Graph::gradients(const ParamSet& params) const
{
    Gradients out = zero_gradients(params);
    for (const auto& n : nodes_) {
        if (n.param_name.empty() || n.grad.size() == 0)
            continue;
        auto it = out.find(n.param_name);
        if (it != out.end())
            it->second += n.grad;
    }
    return out;
}

Gradients backward(Graph& graph, Var loss, const ParamSet& params)
{
    graph.backward(loss);
    return graph.gradients(params);
}

} // namespace bfv::diff
