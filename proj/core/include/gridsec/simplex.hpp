#pragma once

#include <Eigen/Dense>

namespace gridsec {

/// Outcome of a linear program solve.
enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

struct LpResult {
    LpStatus status = LpStatus::NumericalFailure;
    Eigen::VectorXd x;
    double objective = 0.0;
};

/// Maximize c^T x subject to A x <= b, x >= 0. Dense two-phase simplex with
/// Bland's rule; intended for the small attack-synthesis programs (hundreds
/// of variables at most).
LpResult solve_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                      const Eigen::VectorXd& b);

} // namespace gridsec
