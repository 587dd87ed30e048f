// SPDX-License-Identifier: Apache-2.0
//
// nfsplit - near-field wideband THz channel estimation under beam-split
// Copyright (C) 2026 The nfsplit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef NFSPLIT_LINALG_HPP
#define NFSPLIT_LINALG_HPP

#include <algorithm>
#include <limits>

#include <Eigen/Dense>

#include "nfsplit/wavefield.hpp"

namespace nfsplit::linalg {

// Thin-SVD pseudo-inverse with singular values below floor * s_max dropped.
template <typename Scalar>
struct PseudoInverse {
    ComplexMatrix<Scalar> pinv;   // cols x rows
    ComplexMatrix<Scalar> range;  // orthonormal basis of the kept column space
    Scalar condition = 1;         // s_max / s_min over all singular values
    Eigen::Index rank = 0;

    template <typename Rhs>
    ComplexVector<Scalar> solve(const Eigen::MatrixBase<Rhs>& y) const { return pinv * y; }

    // (I - A A^+) y
    template <typename Rhs>
    ComplexVector<Scalar> residual(const Eigen::MatrixBase<Rhs>& y) const
    {
        return y - range * (range.adjoint() * y);
    }
};

template <typename Derived>
auto pseudo_inverse(const Eigen::MatrixBase<Derived>& A,
                    typename Eigen::NumTraits<typename Derived::Scalar>::Real floor = 1e-10)
{
    using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
    PseudoInverse<Real> out;
    Eigen::JacobiSVD<ComplexMatrix<Real>> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const Eigen::Index k = s.size();
    out.pinv = ComplexMatrix<Real>::Zero(A.cols(), A.rows());
    if (k == 0 || s[0] == Real(0)) {
        out.range.resize(A.rows(), 0);
        out.condition = std::numeric_limits<Real>::infinity();
        return out;
    }
    out.condition = (s[k - 1] > 0) ? s[0] / s[k - 1] : std::numeric_limits<Real>::infinity();
    const Real cut = floor * s[0];
    Eigen::Index rank = 0;
    while (rank < k && s[rank] > cut) ++rank;
    out.rank = rank;
    out.range = svd.matrixU().leftCols(rank);
    out.pinv = svd.matrixV().leftCols(rank) * s.head(rank).cwiseInverse().asDiagonal()
               * svd.matrixU().leftCols(rank).adjoint();
    return out;
}

} // namespace nfsplit::linalg

#endif // NFSPLIT_LINALG_HPP
