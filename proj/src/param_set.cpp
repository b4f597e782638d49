#include "bfv/diffcore/param_set.hpp"

namespace bfv::diff {

void ParamSet::add(const std::string& name, Tensor value, bool decay)
{
    if (name.empty())
        throw ContractError("parameter name must be non-empty");
    if (!params_.emplace(name, Parameter{std::move(value), decay}).second)
        throw ContractError("duplicate parameter name: " + name);
}

const Parameter& ParamSet::at(const std::string& name) const
{
    auto it = params_.find(name);
    if (it == params_.end())
        throw ContractError("unknown parameter: " + name);
    return it->second;
}

Parameter& ParamSet::at(const std::string& name)
{
    auto it = params_.find(name);
    if (it == params_.end())
        throw ContractError("unknown parameter: " + name);
    return it->second;
}

Index ParamSet::total_elements() const
{
    Index n = 0;
    for (const auto& [_, p] : params_)
        n += p.value.size();
    return n;
}

bool ParamSet::operator==(const ParamSet& other) const
{
    if (params_.size() != other.params_.size())
        return false;
    auto a = params_.begin();
    auto b = other.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.decay != b->second.decay)
            return false;
        const Tensor& x = a->second.value;
        const Tensor& y = b->second.value;
        if (x.rows() != y.rows() || x.cols() != y.cols() || x != y)
            return false;
    }
    return true;
}

Gradients zero_gradients(const ParamSet& params)
{
    Gradients g;
    for (const auto& [name, p] : params)
        g.emplace(name, Tensor::Zero(p.value.rows(), p.value.cols()));
    return g;
}

} // namespace bfv::diff
