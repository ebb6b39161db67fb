#pragma once

#include <Eigen/Dense>

#include "gridsec/ybus.hpp"

namespace gridsec {

/// Form of the reactive power-balance expression. `Standard` is the usual AC
/// expression sum_j v_i v_j (G sin(th_ij) - B cos(th_ij)); `GCosMinusBSin`
/// is the alternative sum_j v_i v_j (G cos(th_ij) - B sin(th_ij)), kept
/// selectable for cross-checks against other toolchains.
enum class ReactiveForm { Standard, GCosMinusBSin };

struct ModelOptions {
    ReactiveForm reactive_form = ReactiveForm::Standard;
};

/// Net complex power injections implied by the network equations at (v, th):
/// p_i = sum_j v_i v_j (G cos + B sin), q_i per the selected form.
void bus_injections(const AdmittanceMatrix& ybus, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& theta, ReactiveForm form,
                    Eigen::VectorXd& p_out, Eigen::VectorXd& q_out);

/// Partial derivatives of the bus injections with respect to (theta, v),
/// as four dense blocks dP/dth, dP/dv, dQ/dth, dQ/dv.
struct InjectionJacobian {
    Eigen::MatrixXd dp_dtheta;
    Eigen::MatrixXd dp_dv;
    Eigen::MatrixXd dq_dtheta;
    Eigen::MatrixXd dq_dv;
};

InjectionJacobian bus_injection_jacobian(const AdmittanceMatrix& ybus,
                                         const Eigen::VectorXd& v,
                                         const Eigen::VectorXd& theta,
                                         ReactiveForm form);

/// Complex apparent power flow magnitudes |S_from|, |S_to| for every branch
/// at the given bus voltages (pi-model, per-unit).
void branch_flows(const GridCase& grid, const Eigen::VectorXd& v,
                  const Eigen::VectorXd& theta,
                  Eigen::VectorXd& s_from, Eigen::VectorXd& s_to);

} // namespace gridsec
