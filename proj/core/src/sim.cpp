#include "gridsec/sim.hpp"

#include <cmath>

namespace gridsec {

TrapezoidalStepper::TrapezoidalStepper(const DescriptorSystem& sys, StepOptions opts)
    : sys_(sys), opts_(opts) {}

Eigen::VectorXd TrapezoidalStepper::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& q, double dt,
                                         const Eigen::VectorXd& w_process) const {
    const int nd = sys_.n_dynamic();
    const int na = sys_.n_algebraic();
    const int n = nd + na;
    if (dt <= 0.0) throw SimError("step size must be positive", 0.0);
    if (x.size() != n) throw SimError("state dimension mismatch", 0.0);

    const bool noisy = w_process.size() == n;
    const Eigen::VectorXd f_old = sys_.dynamic_rhs(x, u);

    auto residual = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd r(n);
        r.head(nd) = z.head(nd) - x.head(nd) -
                     0.5 * dt * (f_old + sys_.dynamic_rhs(z, u));
        r.tail(na) = sys_.algebraic_residual(z, q);
        if (noisy) {
            r.head(nd) -= dt * w_process.head(nd);
            r.tail(na) += w_process.tail(na);
        }
        return r;
    };

    Eigen::VectorXd z = x;
    Eigen::VectorXd res = residual(z);
    double best = res.cwiseAbs().maxCoeff();

    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool fresh = false;
    auto rebuild = [&](const Eigen::VectorXd& at) {
        Eigen::MatrixXd jac(n, n);
        jac.topRows(nd) = -0.5 * dt * sys_.dynamic_jacobian(at);
        jac.topRows(nd).leftCols(nd) += Eigen::MatrixXd::Identity(nd, nd);
        jac.bottomRows(na) = sys_.algebraic_jacobian(at);
        lu.compute(jac);
        fresh = true;
    };
    rebuild(z);
    for (int it = 0; it < opts_.max_newton_iter && best >= opts_.newton_tol; ++it) {
        const Eigen::VectorXd dz = lu.solve(-res);
        // Backtracking keeps large disturbance steps from overshooting.
        bool improved = false;
        double alpha = 1.0;
        const double prev = best;
        for (int ls = 0; ls < 7; ++ls, alpha *= 0.5) {
            Eigen::VectorXd cand = z + alpha * dz;
            Eigen::VectorXd cand_res = residual(cand);
            const double cand_norm = cand_res.cwiseAbs().maxCoeff();
            if (cand_norm < best) {
                z = std::move(cand);
                res = std::move(cand_res);
                best = cand_norm;
                improved = true;
                break;
            }
        }
        if (improved) {
            fresh = false;
            // Slow contraction means the factorization is stale.
            if (best >= opts_.newton_tol && best > 0.2 * prev) rebuild(z);
        } else if (!fresh) {
            rebuild(z); // stale direction stalled; retry with a current Jacobian
        } else {
            break; // stalled with a fresh Jacobian
        }
    }
    // The converged residual covers both the trapezoidal defect and the
    // algebraic rows (with any held noise), so one gate enforces consistency.
    if (best >= opts_.consistency_tol)
        throw SimError("implicit step did not converge (residual " + std::to_string(best) + ")",
                       0.0);
    return z;
}

Eigen::VectorXd measure(const DescriptorSystem& sys, const Eigen::VectorXd& x,
                        const NoiseModel& noise, std::uint64_t k) {
    Eigen::VectorXd y = sys.measurement_matrix() * x;
    Eigen::VectorXd w = noise.sample_measurement(k);
    if (w.size() == y.size()) y += w;
    else if (w.size() != 0)
        throw SimError("measurement noise dimension mismatch", 0.0);
    return y;
}

Trajectory simulate(const DescriptorSystem& sys, const Eigen::VectorXd& x0,
                    const Eigen::VectorXd& u, const DisturbanceModel& disturbance,
                    const NoiseModel& noise, double dt, double horizon,
                    const SimulateOptions& opts) {
    if (dt <= 0.0 || horizon < 0.0) throw SimError("invalid dt/horizon", 0.0);
    const int steps = static_cast<int>(std::llround(horizon / dt));
    const int n = sys.n_total();
    const bool meas = opts.record_measurements;

    const double init_res =
        sys.algebraic_residual(x0, disturbance.q_bar).cwiseAbs().maxCoeff();
    if (init_res > opts.step.consistency_tol)
        throw SimError("initial state is not algebraically consistent (residual " +
                           std::to_string(init_res) + ")",
                       0.0);

    Trajectory traj;
    traj.dt = dt;
    traj.horizon = horizon;
    traj.states.resize(steps + 1, n);
    traj.inputs.resize(steps + 1, u.size());
    if (meas) traj.measurements.resize(steps + 1, sys.n_measurements());

    TrapezoidalStepper stepper(sys, opts.step);
    Eigen::VectorXd x = x0;
    traj.states.row(0) = x.transpose();
    traj.inputs.row(0) = u.transpose();
    if (meas) traj.measurements.row(0) = measure(sys, x, noise, 0).transpose();

    const bool has_proc = noise.process_cov().size() > 0;
    for (int k = 1; k <= steps; ++k) {
        const double t = k * dt;
        Eigen::VectorXd q = disturbance.sample(t);
        Eigen::VectorXd w = has_proc ? noise.sample_process(k) : Eigen::VectorXd();
        try {
            x = stepper.step(x, u, q, dt, w);
        } catch (const SimError& e) {
            throw SimError(std::string(e.what()) + " at t = " + std::to_string(t), t);
        }
        traj.states.row(k) = x.transpose();
        traj.inputs.row(k) = u.transpose();
        if (meas) traj.measurements.row(k) = measure(sys, x, noise, k).transpose();
    }
    return traj;
}

} // namespace gridsec
