#include "gridsec/state.hpp"

#include <stdexcept>

#include "gridsec/case.hpp"

namespace gridsec {

StateLayout::StateLayout(int n_generators, int n_buses)
    : n_gen_(n_generators), n_bus_(n_buses) {}

std::vector<std::string> StateLayout::state_names(const GridCase& grid) const {
    std::vector<std::string> names;
    names.reserve(n_total());
    for (int g = 0; g < n_gen_; ++g) {
        const std::string tag = std::to_string(grid.generators[g].bus);
        names.push_back("delta_g" + tag);
        names.push_back("omega_g" + tag);
        names.push_back("eq_g" + tag);
        names.push_back("ed_g" + tag);
    }
    for (int g = 0; g < n_gen_; ++g) {
        const std::string tag = std::to_string(grid.generators[g].bus);
        names.push_back("pg_g" + tag);
        names.push_back("qg_g" + tag);
    }
    for (int b = 0; b < n_bus_; ++b) {
        const std::string tag = std::to_string(grid.buses[b].id);
        names.push_back("v_b" + tag);
        names.push_back("theta_b" + tag);
    }
    return names;
}

Eigen::VectorXd pack_state(const StateLayout& layout,
                           const std::vector<GeneratorState>& gen_states,
                           const Eigen::VectorXd& p_g, const Eigen::VectorXd& q_g,
                           const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
    if (static_cast<int>(gen_states.size()) != layout.n_gen() ||
        p_g.size() != layout.n_gen() || q_g.size() != layout.n_gen() ||
        v.size() != layout.n_bus() || theta.size() != layout.n_bus())
        throw std::invalid_argument("pack_state: dimension mismatch");

    Eigen::VectorXd x(layout.n_total());
    for (int g = 0; g < layout.n_gen(); ++g) {
        x[layout.delta(g)] = gen_states[g].delta;
        x[layout.omega(g)] = gen_states[g].omega;
        x[layout.e_q(g)] = gen_states[g].e_q;
        x[layout.e_d(g)] = gen_states[g].e_d;
        x[layout.p_g(g)] = p_g[g];
        x[layout.q_g(g)] = q_g[g];
    }
    for (int b = 0; b < layout.n_bus(); ++b) {
        x[layout.v(b)] = v[b];
        x[layout.theta(b)] = theta[b];
    }
    return x;
}

void unpack_state(const StateLayout& layout, const Eigen::VectorXd& x,
                  std::vector<GeneratorState>& gen_states,
                  Eigen::VectorXd& p_g, Eigen::VectorXd& q_g,
                  Eigen::VectorXd& v, Eigen::VectorXd& theta) {
    if (x.size() != layout.n_total())
        throw std::invalid_argument("unpack_state: dimension mismatch");
    gen_states.resize(layout.n_gen());
    p_g.resize(layout.n_gen());
    q_g.resize(layout.n_gen());
    v.resize(layout.n_bus());
    theta.resize(layout.n_bus());
    for (int g = 0; g < layout.n_gen(); ++g) {
        gen_states[g].delta = x[layout.delta(g)];
        gen_states[g].omega = x[layout.omega(g)];
        gen_states[g].e_q = x[layout.e_q(g)];
        gen_states[g].e_d = x[layout.e_d(g)];
        p_g[g] = x[layout.p_g(g)];
        q_g[g] = x[layout.q_g(g)];
    }
    for (int b = 0; b < layout.n_bus(); ++b) {
        v[b] = x[layout.v(b)];
        theta[b] = x[layout.theta(b)];
    }
}

} // namespace gridsec
