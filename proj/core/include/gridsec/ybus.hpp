#pragma once

#include <complex>

#include <Eigen/Dense>

#include "gridsec/case.hpp"

namespace gridsec {

/// Dense complex bus admittance matrix, indexed by dense bus index.
using AdmittanceMatrix = Eigen::MatrixXcd;

/// Build the bus admittance matrix from the branch list: off-diagonal
/// Y(i,j) = -1/(r+jx) for each branch, diagonals accumulate series
/// admittances plus half the line charging at each end.
/// Rejects zero-impedance branches (r = x = 0).
AdmittanceMatrix build_ybus(const GridCase& grid);

} // namespace gridsec
