#include "gridsec/power_flow.hpp"

#include <vector>

namespace gridsec {

PowerFlowSolution solve_power_flow(const GridCase& grid, const AdmittanceMatrix& ybus,
                                   const PowerFlowOptions& opts) {
    const int n = grid.n_buses();

    // Specified net injections; PV/slack voltage setpoints.
    Eigen::VectorXd p_spec = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd q_spec = Eigen::VectorXd::Zero(n);
    for (int b = 0; b < n; ++b) {
        p_spec[b] -= grid.buses[b].p_load;
        q_spec[b] -= grid.buses[b].q_load;
    }
    for (const auto& g : grid.generators) {
        const int b = grid.bus_index(g.bus);
        p_spec[b] += g.p_gen;
        q_spec[b] += g.q_gen;
    }

    std::vector<int> pv, pq;
    int slack = grid.slack_bus_index();
    for (int b = 0; b < n; ++b) {
        if (b == slack) continue;
        if (grid.buses[b].type == BusType::PV) pv.push_back(b);
        else pq.push_back(b);
    }

    Eigen::VectorXd v(n), theta = Eigen::VectorXd::Zero(n);
    for (int b = 0; b < n; ++b) {
        const auto& bus = grid.buses[b];
        const bool pinned = (bus.type != BusType::PQ);
        v[b] = pinned ? bus.v_set : (opts.flat_start ? 1.0 : bus.v_set);
    }

    // Unknown ordering: theta for all non-slack buses, then v for PQ buses.
    std::vector<int> ang_buses;
    ang_buses.reserve(pv.size() + pq.size());
    for (int b = 0; b < n; ++b)
        if (b != slack) ang_buses.push_back(b);
    const int n_ang = static_cast<int>(ang_buses.size());
    const int n_v = static_cast<int>(pq.size());
    const int m = n_ang + n_v;

    Eigen::VectorXd p_calc(n), q_calc(n);
    double max_mis = 0.0;
    int iter = 0;
    for (; iter <= opts.max_iterations; ++iter) {
        bus_injections(ybus, v, theta, opts.reactive_form, p_calc, q_calc);

        Eigen::VectorXd mismatch(m);
        for (int k = 0; k < n_ang; ++k) mismatch[k] = p_spec[ang_buses[k]] - p_calc[ang_buses[k]];
        for (int k = 0; k < n_v; ++k) mismatch[n_ang + k] = q_spec[pq[k]] - q_calc[pq[k]];

        max_mis = (m == 0) ? 0.0 : mismatch.cwiseAbs().maxCoeff();
        if (max_mis < opts.tolerance) break;
        if (iter == opts.max_iterations)
            throw PowerFlowError("power flow did not converge after " +
                                     std::to_string(opts.max_iterations) +
                                     " iterations (max mismatch " + std::to_string(max_mis) + ")",
                                 max_mis, iter);

        InjectionJacobian inj = bus_injection_jacobian(ybus, v, theta, opts.reactive_form);
        Eigen::MatrixXd jac(m, m);
        for (int r = 0; r < n_ang; ++r) {
            const int i = ang_buses[r];
            for (int c = 0; c < n_ang; ++c) jac(r, c) = inj.dp_dtheta(i, ang_buses[c]);
            for (int c = 0; c < n_v; ++c) jac(r, n_ang + c) = inj.dp_dv(i, pq[c]);
        }
        for (int r = 0; r < n_v; ++r) {
            const int i = pq[r];
            for (int c = 0; c < n_ang; ++c) jac(n_ang + r, c) = inj.dq_dtheta(i, ang_buses[c]);
            for (int c = 0; c < n_v; ++c) jac(n_ang + r, n_ang + c) = inj.dq_dv(i, pq[c]);
        }

        Eigen::VectorXd dx = jac.partialPivLu().solve(mismatch);
        for (int k = 0; k < n_ang; ++k) theta[ang_buses[k]] += dx[k];
        for (int k = 0; k < n_v; ++k) v[pq[k]] += dx[n_ang + k];
    }

    // Generator outputs from the solved injections.
    bus_injections(ybus, v, theta, opts.reactive_form, p_calc, q_calc);
    PowerFlowSolution sol;
    sol.v = v;
    sol.theta = theta;
    sol.p_gen.resize(grid.n_generators());
    sol.q_gen.resize(grid.n_generators());
    for (int g = 0; g < grid.n_generators(); ++g) {
        const int b = grid.bus_index(grid.generators[g].bus);
        sol.p_gen[g] = p_calc[b] + grid.buses[b].p_load;
        sol.q_gen[g] = q_calc[b] + grid.buses[b].q_load;
    }
    sol.max_mismatch = max_mis;
    sol.iterations = iter;
    return sol;
}

} // namespace gridsec
