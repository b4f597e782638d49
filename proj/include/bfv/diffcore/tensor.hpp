#pragma once

#include <Eigen/Dense>

#include <string>

#include "bfv/errors.hpp"

namespace bfv::diff {

// Training carrier: dense 64-bit matrix. Vectors are 1×n rows (biases,
// gains) or B×1 columns (per-sample values). File ingestion is 32-bit.
using Tensor = Eigen::MatrixXd;
using Tensor32 = Eigen::MatrixXf;
using Index = Eigen::Index;

template <typename Derived>
inline bool all_finite(const Eigen::DenseBase<Derived>& x)
{
    return x.derived().array().isFinite().all();
}

template <typename Derived>
inline std::string shape_string(const Eigen::DenseBase<Derived>& x)
{
    return std::to_string(x.rows()) + "x" + std::to_string(x.cols());
}

template <typename Derived>
inline void require_shape(const Eigen::DenseBase<Derived>& x, Index rows, Index cols,
                          const std::string& what)
{
    if (x.rows() != rows || x.cols() != cols)
        throw DimensionError(what + ": expected " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + shape_string(x));
}

template <typename Derived>
inline void require_finite(const Eigen::DenseBase<Derived>& x, const std::string& what)
{
    if (!all_finite(x))
        throw NumericError(what + ": non-finite value");
}

} // namespace bfv::diff
