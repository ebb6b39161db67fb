#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "gridsec/case.hpp"
#include "gridsec/power.hpp"
#include "gridsec/power_flow.hpp"
#include "gridsec/state.hpp"
#include "gridsec/ybus.hpp"

namespace gridsec {

class DescriptorError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Assembled network model in singular-mass form
///   [I 0; 0 0] xdot = A x + f(x) + B_u u + B_w q
/// with dynamic rows holding the fourth-order machine equations and algebraic
/// rows holding the stator power expressions plus the bus power balances.
///
/// Inputs u stack mechanical torques then field voltages per generator;
/// disturbances q stack renewable injections (P_R, Q_R) then loads (P_L, Q_L)
/// per bus. The measurement map y = C x is attached after construction.
class DescriptorSystem {
public:
    DescriptorSystem() = default;

    const GridCase& grid() const { return grid_; }
    const AdmittanceMatrix& ybus() const { return ybus_; }
    const StateLayout& layout() const { return layout_; }
    const ModelOptions& options() const { return options_; }

    int n_dynamic() const { return layout_.n_dynamic(); }
    int n_algebraic() const { return layout_.n_algebraic(); }
    int n_total() const { return layout_.n_total(); }
    int n_inputs() const { return 2 * layout_.n_gen(); }
    int n_disturbances() const { return 4 * layout_.n_bus(); }

    /// Right-hand side of the differential rows: xdot_d = F_d(x, u).
    Eigen::VectorXd dynamic_rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
    /// Residual of the algebraic rows: G_a(x, q) = 0 at a consistent point.
    Eigen::VectorXd algebraic_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& q) const;

    /// dF_d/dx and dG_a/dx, both over the full state.
    Eigen::MatrixXd dynamic_jacobian(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd algebraic_jacobian(const Eigen::VectorXd& x) const;

    /// Linear/nonlinear split: F_d = A_d x_d + f_d(x) + B_d u and
    /// G_a = A_a x_a + f_a(x) + B_a q.
    const Eigen::MatrixXd& a_dynamic() const { return a_d_; }
    const Eigen::MatrixXd& a_algebraic() const { return a_a_; }
    const Eigen::MatrixXd& b_dynamic() const { return b_d_; }
    const Eigen::MatrixXd& b_algebraic() const { return b_a_; }
    Eigen::VectorXd f_dynamic(const Eigen::VectorXd& x) const;
    Eigen::VectorXd f_algebraic(const Eigen::VectorXd& x) const;

    /// Consistent steady state, the inputs that hold it, and nominal loads.
    const Eigen::VectorXd& operating_point() const { return x0_; }
    const Eigen::VectorXd& nominal_input() const { return u0_; }
    const Eigen::VectorXd& nominal_disturbance() const { return q0_; }

    void set_measurement_matrix(const Eigen::MatrixXd& c);
    const Eigen::MatrixXd& measurement_matrix() const;
    int n_measurements() const { return static_cast<int>(c_.rows()); }

    /// Re-solve algebraic states from the given dynamic states (Newton on the
    /// algebraic rows); used for consistent restarts and validation.
    Eigen::VectorXd solve_algebraic(const Eigen::VectorXd& x_guess, const Eigen::VectorXd& q,
                                    double tol = 1e-10, int max_iter = 50) const;

    /// Steady operation for the given inputs and disturbance. Because total
    /// torque is fixed while losses depend on the flow pattern, the exact
    /// fixed point generally has a common speed offset that damping absorbs;
    /// the solve augments that offset as an unknown and pins the slack angle,
    /// returning the rotating-frame steady state.
    Eigen::VectorXd solve_equilibrium(const Eigen::VectorXd& x_guess, const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& q, double tol = 1e-10,
                                      int max_iter = 50) const;

    friend DescriptorSystem assemble_descriptor(const GridCase&, const AdmittanceMatrix&,
                                                const PowerFlowSolution&, const ModelOptions&);

private:
    GridCase grid_;
    AdmittanceMatrix ybus_;
    StateLayout layout_;
    ModelOptions options_;
    std::vector<int> gen_bus_;   // dense bus index per generator

    Eigen::MatrixXd a_d_, a_a_, b_d_, b_a_;
    Eigen::VectorXd x0_, u0_, q0_;
    Eigen::MatrixXd c_;
    bool has_c_ = false;
};

/// Build the descriptor system around a solved operating point: back-solves
/// the machine internal states (delta, e_q', e_d') and steady inputs from the
/// power-flow solution and verifies the assembled steady state is consistent
/// (derivatives and algebraic residuals below `steady_tol`).
DescriptorSystem assemble_descriptor(const GridCase& grid, const AdmittanceMatrix& ybus,
                                     const PowerFlowSolution& pf,
                                     const ModelOptions& options = {});

} // namespace gridsec
