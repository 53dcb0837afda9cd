// Copyright 2026 The mrfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "mrfuse/error.hpp"

namespace mrfuse {

inline void symmetrize(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

inline double smallest_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Lower Cholesky factor of a covariance after conditioning.
///
/// The matrix is symmetrized in place. If the factorization fails, jitter is
/// added to the diagonal starting at 1e-12 and escalating by 10x up to 1e-6.
/// Jitter is relative to each diagonal entry so that blocks with very
/// different physical scales (displacements vs. axial rigidities) are not
/// swamped; entries with a zero diagonal get the same factor times the mean
/// diagonal instead. The returned factor is for the jittered matrix, which is
/// also written back to `cov`.
inline Eigen::MatrixXd conditioned_cholesky(Eigen::MatrixXd& cov) {
  symmetrize(cov);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const Eigen::Index n = cov.rows();
  const Eigen::VectorXd diag = cov.diagonal();
  const double mean_diag = n > 0 ? std::abs(diag.sum()) / static_cast<double>(n) : 0.0;
  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i) scale(i) = diag(i) > 0.0 ? diag(i) : mean_diag;

  for (double eps = 1e-12; eps <= 1.0001e-6; eps *= 10.0) {
    Eigen::MatrixXd trial = cov;
    trial.diagonal() += eps * scale;
    llt.compute(trial);
    if (llt.info() == Eigen::Success) {
      cov = trial;
      return llt.matrixL();
    }
  }
  std::ostringstream os;
  os << "covariance is not positive semidefinite after conditioning (smallest eigenvalue "
     << smallest_eigenvalue(cov) << ")";
  throw NumericalError(os.str());
}

}  // namespace mrfuse
