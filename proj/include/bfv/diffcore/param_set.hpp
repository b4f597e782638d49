#pragma once

#include <map>
#include <string>

#include "bfv/diffcore/tensor.hpp"

namespace bfv::diff {

struct Parameter {
    Tensor value;
    bool decay = true;  // false for biases, layer-norm gains/biases and PReLU slopes
};

using Gradients = std::map<std::string, Tensor>;

// Named trainable parameters, iterated in name order so every consumer
// (optimizer, serializer) sees a deterministic sequence.
class ParamSet {
public:
    using Map = std::map<std::string, Parameter>;

    void add(const std::string& name, Tensor value, bool decay);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    const Parameter& at(const std::string& name) const;
    Parameter& at(const std::string& name);
    const Tensor& value(const std::string& name) const { return at(name).value; }
    Tensor& value(const std::string& name) { return at(name).value; }

    std::size_t size() const noexcept { return params_.size(); }
    Index total_elements() const;

    Map::const_iterator begin() const { return params_.begin(); }
    Map::const_iterator end() const { return params_.end(); }
    Map::iterator begin() { return params_.begin(); }
    Map::iterator end() { return params_.end(); }

    bool operator==(const ParamSet& other) const;

private:
    Map params_;
};

// Zero tensors with the shape of every parameter.
Gradients zero_gradients(const ParamSet& params);

} // namespace bfv::diff
