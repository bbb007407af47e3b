// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_TYPES_HPP
#define BEAMTRACK_TYPES_HPP

#include <Eigen/Dense>
#include <complex>

namespace beamtrack {

using Scalar = double;
using Complex = std::complex<Scalar>;
using Index = Eigen::Index;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using IntMatrix = Eigen::MatrixXi;

}  // namespace beamtrack

#endif
