#pragma once

#include <Eigen/Dense>

#include "bfv/errors.hpp"

namespace bfv::calib {

// x ↦ (x − mean)·transform, with transform = U·diag(1/√λ) over the
// covariance eigenpairs with λ > rel_tol·λ_max (largest first).
template <typename Scalar>
struct WhiteningTransform {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

    RowVector mean;
    Matrix transform;  // V × k

    Eigen::Index rank() const { return transform.cols(); }
};

template <typename Derived>
WhiteningTransform<typename Derived::Scalar> whiten_fit(const Eigen::MatrixBase<Derived>& x,
                                                        double rel_tol = 1e-10)
{
    using Scalar = typename Derived::Scalar;
    using Matrix = typename WhiteningTransform<Scalar>::Matrix;
    const Eigen::Index n = x.rows();
    if (n < 2)
        throw ContractError("whiten_fit: need at least two samples");

    WhiteningTransform<Scalar> w;
    w.mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - w.mean;
    const Matrix cov = (centered.adjoint() * centered) / static_cast<Scalar>(n - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("whiten_fit: eigendecomposition failed");
    const auto& values = eig.eigenvalues();  // ascending
    const Scalar largest = values(values.size() - 1);
    if (!(largest > Scalar(0)))
        throw ContractError("whiten_fit: data has rank 0");

    Eigen::Index keep = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values(i) > static_cast<Scalar>(rel_tol) * largest)
            ++keep;
    w.transform.resize(x.cols(), keep);
    for (Eigen::Index j = 0; j < keep; ++j) {
        const Eigen::Index src = values.size() - 1 - j;
        w.transform.col(j) = eig.eigenvectors().col(src) / std::sqrt(values(src));
    }
    return w;
}

template <typename Scalar, typename Derived>
typename WhiteningTransform<Scalar>::Matrix whiten_apply(const WhiteningTransform<Scalar>& w,
                                                         const Eigen::MatrixBase<Derived>& x)
{
    if (x.cols() != w.mean.cols())
        throw DimensionError("whiten_apply: width mismatch");
    return (x.rowwise() - w.mean) * w.transform;
}

// Sample covariance with the n − 1 denominator.
template <typename Derived>
typename Derived::PlainObject sample_covariance(const Eigen::MatrixBase<Derived>& x)
{
    const typename Derived::PlainObject centered = x.rowwise() - x.colwise().mean();
    return (centered.adjoint() * centered) / static_cast<typename Derived::Scalar>(x.rows() - 1);
}

} // namespace bfv::calib
