#include "gridsec/power.hpp"

#include <cmath>

namespace gridsec {

void bus_injections(const AdmittanceMatrix& ybus, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& theta, ReactiveForm form,
                    Eigen::VectorXd& p_out, Eigen::VectorXd& q_out) {
    const Eigen::Index n = ybus.rows();
    p_out.setZero(n);
    q_out.setZero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 0.0, q = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = ybus(i, j).real();
            const double b = ybus(i, j).imag();
            if (g == 0.0 && b == 0.0) continue;
            const double th = theta[i] - theta[j];
            const double c = std::cos(th), s = std::sin(th);
            const double vv = v[i] * v[j];
            p += vv * (g * c + b * s);
            q += (form == ReactiveForm::Standard) ? vv * (g * s - b * c)
                                                  : vv * (g * c - b * s);
        }
        p_out[i] = p;
        q_out[i] = q;
    }
}

InjectionJacobian bus_injection_jacobian(const AdmittanceMatrix& ybus,
                                         const Eigen::VectorXd& v,
                                         const Eigen::VectorXd& theta,
                                         ReactiveForm form) {
    const Eigen::Index n = ybus.rows();
    InjectionJacobian jac;
    jac.dp_dtheta.setZero(n, n);
    jac.dp_dv.setZero(n, n);
    jac.dq_dtheta.setZero(n, n);
    jac.dq_dv.setZero(n, n);

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = ybus(i, j).real();
            const double b = ybus(i, j).imag();
            if (g == 0.0 && b == 0.0) continue;
            const double th = theta[i] - theta[j];
            const double c = std::cos(th), s = std::sin(th);

            const double pterm = v[i] * v[j] * (g * c + b * s);
            const double pterm_dth = v[i] * v[j] * (-g * s + b * c);
            double qterm, qterm_dth;
            if (form == ReactiveForm::Standard) {
                qterm = v[i] * v[j] * (g * s - b * c);
                qterm_dth = v[i] * v[j] * (g * c + b * s);
            } else {
                qterm = v[i] * v[j] * (g * c - b * s);
                qterm_dth = v[i] * v[j] * (-g * s - b * c);
            }

            if (i == j) {
                // theta_ii = 0 contributes nothing through the angle.
                jac.dp_dv(i, i) += 2.0 * v[i] * g;
                jac.dq_dv(i, i) += (form == ReactiveForm::Standard) ? -2.0 * v[i] * b
                                                                    : 2.0 * v[i] * g;
            } else {
                jac.dp_dtheta(i, i) += pterm_dth;
                jac.dp_dtheta(i, j) = -pterm_dth;
                jac.dp_dv(i, i) += pterm / v[i];
                jac.dp_dv(i, j) = pterm / v[j];

                jac.dq_dtheta(i, i) += qterm_dth;
                jac.dq_dtheta(i, j) = -qterm_dth;
                jac.dq_dv(i, i) += qterm / v[i];
                jac.dq_dv(i, j) = qterm / v[j];
            }
        }
    }
    return jac;
}

void branch_flows(const GridCase& grid, const Eigen::VectorXd& v,
                  const Eigen::VectorXd& theta,
                  Eigen::VectorXd& s_from, Eigen::VectorXd& s_to) {
    const int m = static_cast<int>(grid.branches.size());
    s_from.resize(m);
    s_to.resize(m);
    for (int k = 0; k < m; ++k) {
        const auto& br = grid.branches[k];
        const int i = grid.bus_index(br.from);
        const int j = grid.bus_index(br.to);
        const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        const std::complex<double> sh(0.0, br.b_shunt / 2.0);
        const std::complex<double> vi = std::polar(v[i], theta[i]);
        const std::complex<double> vj = std::polar(v[j], theta[j]);
        const std::complex<double> i_from = (vi - vj) * ys + vi * sh;
        const std::complex<double> i_to = (vj - vi) * ys + vj * sh;
        s_from[k] = std::abs(vi * std::conj(i_from));
        s_to[k] = std::abs(vj * std::conj(i_to));
    }
}

} // namespace gridsec
