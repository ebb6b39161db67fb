#include "gridsec/descriptor.hpp"

#include <cmath>

namespace gridsec {

namespace {

struct SaliencyCoeffs {
    double k;  // (x_q - x_d') / (2 x_d' x_q)
    double m;  // (x_d' + x_q) / (2 x_d' x_q)
};

SaliencyCoeffs saliency(const GeneratorParams& p) {
    return {(p.x_q - p.x_d_prime) / (2.0 * p.x_d_prime * p.x_q),
            (p.x_d_prime + p.x_q) / (2.0 * p.x_d_prime * p.x_q)};
}

} // namespace

Eigen::VectorXd DescriptorSystem::dynamic_rhs(const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& u) const {
    const auto& L = layout_;
    Eigen::VectorXd rhs(L.n_dynamic());
    for (int g = 0; g < L.n_gen(); ++g) {
        const auto& p = grid_.generators[g].params;
        const int b = gen_bus_[g];
        const double delta = x[L.delta(g)];
        const double omega = x[L.omega(g)];
        const double eq = x[L.e_q(g)];
        const double ed = x[L.e_d(g)];
        const double pg = x[L.p_g(g)];
        const double v = x[L.v(b)];
        const double th = x[L.theta(b)];
        const double d = delta - th;
        const double t_m = u[g];
        const double e_fd = u[L.n_gen() + g];

        rhs[L.delta(g)] = omega - p.omega0;
        rhs[L.omega(g)] = (t_m - pg - p.damping * (omega - p.omega0)) / p.inertia;
        rhs[L.e_q(g)] = (-(p.x_d / p.x_d_prime) * eq +
                         ((p.x_d - p.x_d_prime) / p.x_d_prime) * v * std::cos(d) + e_fd) /
                        p.t_d0_prime;
        rhs[L.e_d(g)] = (-ed + ((p.x_q - p.x_q_prime) / p.x_q) * v * std::sin(d)) /
                        p.t_q0_prime;
    }
    return rhs;
}

Eigen::VectorXd DescriptorSystem::algebraic_residual(const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& q) const {
    const auto& L = layout_;
    const int ng = L.n_gen();
    const int nb = L.n_bus();
    Eigen::VectorXd res(L.n_algebraic());

    Eigen::VectorXd v(nb), th(nb);
    for (int b = 0; b < nb; ++b) {
        v[b] = x[L.v(b)];
        th[b] = x[L.theta(b)];
    }
    Eigen::VectorXd p_calc, q_calc;
    bus_injections(ybus_, v, th, options_.reactive_form, p_calc, q_calc);

    for (int g = 0; g < ng; ++g) {
        const auto& p = grid_.generators[g].params;
        const auto [k, m] = saliency(p);
        const int b = gen_bus_[g];
        const double eq = x[L.e_q(g)];
        const double d = x[L.delta(g)] - th[b];
        const double vb = v[b];
        res[g] = eq * vb * std::sin(d) / p.x_d_prime - k * vb * vb * std::sin(2.0 * d) -
                 x[L.p_g(g)];
        res[ng + g] = eq * vb * std::cos(d) / p.x_d_prime - m * vb * vb -
                      k * vb * vb * std::cos(2.0 * d) - x[L.q_g(g)];
    }
    for (int b = 0; b < nb; ++b) {
        double pg = 0.0, qg = 0.0;
        const int g = grid_.generator_at_bus(b);
        if (g >= 0) {
            pg = x[L.p_g(g)];
            qg = x[L.q_g(g)];
        }
        const double p_r = q[b], q_r = q[nb + b];
        const double p_l = q[2 * nb + b], q_l = q[3 * nb + b];
        res[2 * ng + b] = pg + p_r - p_l - p_calc[b];
        res[2 * ng + nb + b] = qg + q_r - q_l - q_calc[b];
    }
    return res;
}

Eigen::MatrixXd DescriptorSystem::dynamic_jacobian(const Eigen::VectorXd& x) const {
    const auto& L = layout_;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(L.n_dynamic(), L.n_total());
    for (int g = 0; g < L.n_gen(); ++g) {
        const auto& p = grid_.generators[g].params;
        const int b = gen_bus_[g];
        const double d = x[L.delta(g)] - x[L.theta(b)];
        const double v = x[L.v(b)];
        const double c1 = (p.x_d - p.x_d_prime) / p.x_d_prime;
        const double c2 = (p.x_q - p.x_q_prime) / p.x_q;

        jac(L.delta(g), L.omega(g)) = 1.0;

        jac(L.omega(g), L.omega(g)) = -p.damping / p.inertia;
        jac(L.omega(g), L.p_g(g)) = -1.0 / p.inertia;

        jac(L.e_q(g), L.e_q(g)) = -(p.x_d / p.x_d_prime) / p.t_d0_prime;
        jac(L.e_q(g), L.v(b)) = c1 * std::cos(d) / p.t_d0_prime;
        jac(L.e_q(g), L.delta(g)) = -c1 * v * std::sin(d) / p.t_d0_prime;
        jac(L.e_q(g), L.theta(b)) = c1 * v * std::sin(d) / p.t_d0_prime;

        jac(L.e_d(g), L.e_d(g)) = -1.0 / p.t_q0_prime;
        jac(L.e_d(g), L.v(b)) = c2 * std::sin(d) / p.t_q0_prime;
        jac(L.e_d(g), L.delta(g)) = c2 * v * std::cos(d) / p.t_q0_prime;
        jac(L.e_d(g), L.theta(b)) = -c2 * v * std::cos(d) / p.t_q0_prime;
    }
    return jac;
}

Eigen::MatrixXd DescriptorSystem::algebraic_jacobian(const Eigen::VectorXd& x) const {
    const auto& L = layout_;
    const int ng = L.n_gen();
    const int nb = L.n_bus();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(L.n_algebraic(), L.n_total());

    Eigen::VectorXd v(nb), th(nb);
    for (int b = 0; b < nb; ++b) {
        v[b] = x[L.v(b)];
        th[b] = x[L.theta(b)];
    }

    for (int g = 0; g < ng; ++g) {
        const auto& p = grid_.generators[g].params;
        const auto [k, m] = saliency(p);
        const int b = gen_bus_[g];
        const double eq = x[L.e_q(g)];
        const double d = x[L.delta(g)] - th[b];
        const double vb = v[b];
        const double sd = std::sin(d), cd = std::cos(d);
        const double s2 = std::sin(2.0 * d), c2 = std::cos(2.0 * d);

        // stator active power row
        double dp_dd = eq * vb * cd / p.x_d_prime - 2.0 * k * vb * vb * c2;
        jac(g, L.e_q(g)) = vb * sd / p.x_d_prime;
        jac(g, L.delta(g)) = dp_dd;
        jac(g, L.theta(b)) = -dp_dd;
        jac(g, L.v(b)) = eq * sd / p.x_d_prime - 2.0 * k * vb * s2;
        jac(g, L.p_g(g)) = -1.0;

        // stator reactive power row
        double dq_dd = -eq * vb * sd / p.x_d_prime + 2.0 * k * vb * vb * s2;
        jac(ng + g, L.e_q(g)) = vb * cd / p.x_d_prime;
        jac(ng + g, L.delta(g)) = dq_dd;
        jac(ng + g, L.theta(b)) = -dq_dd;
        jac(ng + g, L.v(b)) = eq * cd / p.x_d_prime - 2.0 * m * vb - 2.0 * k * vb * c2;
        jac(ng + g, L.q_g(g)) = -1.0;
    }

    const InjectionJacobian inj = bus_injection_jacobian(ybus_, v, th, options_.reactive_form);
    for (int b = 0; b < nb; ++b) {
        const int g = grid_.generator_at_bus(b);
        if (g >= 0) {
            jac(2 * ng + b, L.p_g(g)) = 1.0;
            jac(2 * ng + nb + b, L.q_g(g)) = 1.0;
        }
        for (int j = 0; j < nb; ++j) {
            if (inj.dp_dtheta(b, j) != 0.0) jac(2 * ng + b, L.theta(j)) -= inj.dp_dtheta(b, j);
            if (inj.dp_dv(b, j) != 0.0) jac(2 * ng + b, L.v(j)) -= inj.dp_dv(b, j);
            if (inj.dq_dtheta(b, j) != 0.0)
                jac(2 * ng + nb + b, L.theta(j)) -= inj.dq_dtheta(b, j);
            if (inj.dq_dv(b, j) != 0.0) jac(2 * ng + nb + b, L.v(j)) -= inj.dq_dv(b, j);
        }
    }
    return jac;
}

Eigen::VectorXd DescriptorSystem::f_dynamic(const Eigen::VectorXd& x) const {
    const auto& L = layout_;
    Eigen::VectorXd f(L.n_dynamic());
    for (int g = 0; g < L.n_gen(); ++g) {
        const auto& p = grid_.generators[g].params;
        const int b = gen_bus_[g];
        const double d = x[L.delta(g)] - x[L.theta(b)];
        const double v = x[L.v(b)];
        f[L.delta(g)] = -p.omega0;
        f[L.omega(g)] = (-x[L.p_g(g)] + p.damping * p.omega0) / p.inertia;
        f[L.e_q(g)] = ((p.x_d - p.x_d_prime) / p.x_d_prime) * v * std::cos(d) / p.t_d0_prime;
        f[L.e_d(g)] = ((p.x_q - p.x_q_prime) / p.x_q) * v * std::sin(d) / p.t_q0_prime;
    }
    return f;
}

Eigen::VectorXd DescriptorSystem::f_algebraic(const Eigen::VectorXd& x) const {
    const auto& L = layout_;
    const int ng = L.n_gen();
    const int nb = L.n_bus();
    Eigen::VectorXd f(L.n_algebraic());

    Eigen::VectorXd v(nb), th(nb);
    for (int b = 0; b < nb; ++b) {
        v[b] = x[L.v(b)];
        th[b] = x[L.theta(b)];
    }
    Eigen::VectorXd p_calc, q_calc;
    bus_injections(ybus_, v, th, options_.reactive_form, p_calc, q_calc);

    for (int g = 0; g < ng; ++g) {
        const auto& p = grid_.generators[g].params;
        const auto [k, m] = saliency(p);
        const int b = gen_bus_[g];
        const double eq = x[L.e_q(g)];
        const double d = x[L.delta(g)] - th[b];
        const double vb = v[b];
        f[g] = eq * vb * std::sin(d) / p.x_d_prime - k * vb * vb * std::sin(2.0 * d);
        f[ng + g] = eq * vb * std::cos(d) / p.x_d_prime - m * vb * vb -
                    k * vb * vb * std::cos(2.0 * d);
    }
    for (int b = 0; b < nb; ++b) {
        f[2 * ng + b] = -p_calc[b];
        f[2 * ng + nb + b] = -q_calc[b];
    }
    return f;
}

void DescriptorSystem::set_measurement_matrix(const Eigen::MatrixXd& c) {
    if (c.cols() != n_total())
        throw DescriptorError("measurement matrix has " + std::to_string(c.cols()) +
                              " columns, state dimension is " + std::to_string(n_total()));
    c_ = c;
    has_c_ = true;
}

const Eigen::MatrixXd& DescriptorSystem::measurement_matrix() const {
    if (!has_c_) throw DescriptorError("no measurement matrix attached");
    return c_;
}

Eigen::VectorXd DescriptorSystem::solve_algebraic(const Eigen::VectorXd& x_guess,
                                                  const Eigen::VectorXd& q, double tol,
                                                  int max_iter) const {
    const int nd = n_dynamic();
    const int na = n_algebraic();
    Eigen::VectorXd x = x_guess;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd res = algebraic_residual(x, q);
        if (res.cwiseAbs().maxCoeff() < tol) return x;
        Eigen::MatrixXd jaa = algebraic_jacobian(x).rightCols(na);
        Eigen::VectorXd dx = jaa.partialPivLu().solve(-res);
        x.tail(na) += dx;
        (void)nd;
    }
    Eigen::VectorXd res = algebraic_residual(x, q);
    throw DescriptorError("algebraic solve did not converge (residual " +
                          std::to_string(res.cwiseAbs().maxCoeff()) + ")");
}

Eigen::VectorXd DescriptorSystem::solve_equilibrium(const Eigen::VectorXd& x_guess,
                                                    const Eigen::VectorXd& u,
                                                    const Eigen::VectorXd& q, double tol,
                                                    int max_iter) const {
    const int nd = n_dynamic();
    const int na = n_algebraic();
    const int n = nd + na;
    const auto& L = layout_;
    const int slack_theta = L.theta(grid_.slack_bus_index());
    const double theta_ref = x_guess[slack_theta];

    Eigen::VectorXd x = x_guess;
    double dw = 0.0; // common speed offset absorbed by damping
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd res(n + 1);
        res.head(nd) = dynamic_rhs(x, u);
        for (int g = 0; g < L.n_gen(); ++g) res[L.delta(g)] -= dw;
        res.segment(nd, na) = algebraic_residual(x, q);
        res[n] = x[slack_theta] - theta_ref;
        if (res.cwiseAbs().maxCoeff() < tol) return x;

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + 1, n + 1);
        jac.block(0, 0, nd, n) = dynamic_jacobian(x);
        jac.block(nd, 0, na, n) = algebraic_jacobian(x);
        for (int g = 0; g < L.n_gen(); ++g) jac(L.delta(g), n) = -1.0;
        jac(n, slack_theta) = 1.0;
        const Eigen::VectorXd step = jac.partialPivLu().solve(-res);
        x += step.head(n);
        dw += step[n];
    }
    throw DescriptorError("equilibrium solve did not converge");
}

DescriptorSystem assemble_descriptor(const GridCase& grid, const AdmittanceMatrix& ybus,
                                     const PowerFlowSolution& pf, const ModelOptions& options) {
    DescriptorSystem sys;
    sys.grid_ = grid;
    sys.ybus_ = ybus;
    sys.options_ = options;
    sys.layout_ = StateLayout(grid.n_generators(), grid.n_buses());
    sys.gen_bus_.resize(grid.n_generators());
    for (int g = 0; g < grid.n_generators(); ++g)
        sys.gen_bus_[g] = grid.bus_index(grid.generators[g].bus);

    const auto& L = sys.layout_;
    const int ng = L.n_gen();
    const int nb = L.n_bus();

    // Back-solve machine internal states so every derivative is zero at the
    // power-flow point, then the steady inputs that hold them there.
    Eigen::VectorXd x0(L.n_total());
    Eigen::VectorXd u0(2 * ng);
    for (int g = 0; g < ng; ++g) {
        const auto& p = grid.generators[g].params;
        const auto [k, m] = saliency(p);
        const int b = sys.gen_bus_[g];
        const double v = pf.v[b];
        const double th = pf.theta[b];
        const double pg = pf.p_gen[g];
        const double qg = pf.q_gen[g];

        const double qx = qg + v * v / p.x_q;
        if (std::abs(pg) < 1e-14 && std::abs(qx) < 1e-14)
            throw DescriptorError("generator " + std::to_string(grid.generators[g].bus) +
                                  " rotor angle is undetermined at this operating point");
        const double d = std::atan2(pg, qx);
        const double h = std::hypot(pg, qx);
        const double a = h + 2.0 * k * v * v * std::cos(d);
        const double eq = a * p.x_d_prime / v;
        const double ed = (p.x_q - p.x_q_prime) / p.x_q * v * std::sin(d);

        x0[L.delta(g)] = th + d;
        x0[L.omega(g)] = p.omega0;
        x0[L.e_q(g)] = eq;
        x0[L.e_d(g)] = ed;
        x0[L.p_g(g)] = pg;
        x0[L.q_g(g)] = qg;

        u0[g] = pg; // mechanical torque balances electrical power
        u0[ng + g] = (p.x_d / p.x_d_prime) * eq -
                     ((p.x_d - p.x_d_prime) / p.x_d_prime) * v * std::cos(d);
    }
    for (int b = 0; b < nb; ++b) {
        x0[L.v(b)] = pf.v[b];
        x0[L.theta(b)] = pf.theta[b];
    }

    // Nominal disturbance: zero renewable injections, case loads.
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(4 * nb);
    for (int b = 0; b < nb; ++b) {
        q0[2 * nb + b] = grid.buses[b].p_load;
        q0[3 * nb + b] = grid.buses[b].q_load;
    }

    sys.x0_ = x0;
    sys.u0_ = u0;
    sys.q0_ = q0;

    // Constant split matrices.
    sys.a_d_ = Eigen::MatrixXd::Zero(L.n_dynamic(), L.n_dynamic());
    sys.b_d_ = Eigen::MatrixXd::Zero(L.n_dynamic(), 2 * ng);
    for (int g = 0; g < ng; ++g) {
        const auto& p = grid.generators[g].params;
        sys.a_d_(L.delta(g), L.omega(g)) = 1.0;
        sys.a_d_(L.omega(g), L.omega(g)) = -p.damping / p.inertia;
        sys.a_d_(L.e_q(g), L.e_q(g)) = -(p.x_d / p.x_d_prime) / p.t_d0_prime;
        sys.a_d_(L.e_d(g), L.e_d(g)) = -1.0 / p.t_q0_prime;
        sys.b_d_(L.omega(g), g) = 1.0 / p.inertia;
        sys.b_d_(L.e_q(g), ng + g) = 1.0 / p.t_d0_prime;
    }
    const int nd = L.n_dynamic();
    sys.a_a_ = Eigen::MatrixXd::Zero(L.n_algebraic(), L.n_algebraic());
    sys.b_a_ = Eigen::MatrixXd::Zero(L.n_algebraic(), 4 * nb);
    for (int g = 0; g < ng; ++g) {
        sys.a_a_(g, L.p_g(g) - nd) = -1.0;
        sys.a_a_(ng + g, L.q_g(g) - nd) = -1.0;
        const int b = sys.gen_bus_[g];
        sys.a_a_(2 * ng + b, L.p_g(g) - nd) = 1.0;
        sys.a_a_(2 * ng + nb + b, L.q_g(g) - nd) = 1.0;
    }
    for (int b = 0; b < nb; ++b) {
        sys.b_a_(2 * ng + b, b) = 1.0;            // P_R
        sys.b_a_(2 * ng + b, 2 * nb + b) = -1.0;  // P_L
        sys.b_a_(2 * ng + nb + b, nb + b) = 1.0;  // Q_R
        sys.b_a_(2 * ng + nb + b, 3 * nb + b) = -1.0; // Q_L
    }

    constexpr double steady_tol = 1e-8;
    const double d_res = sys.dynamic_rhs(x0, u0).cwiseAbs().maxCoeff();
    const double a_res = sys.algebraic_residual(x0, q0).cwiseAbs().maxCoeff();
    if (d_res > steady_tol || a_res > steady_tol)
        throw DescriptorError("operating point is not a steady state (derivative residual " +
                              std::to_string(d_res) + ", algebraic residual " +
                              std::to_string(a_res) + ")");
    return sys;
}

} // namespace gridsec
