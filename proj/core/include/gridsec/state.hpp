#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridsec {

struct GridCase;

/// Index map for the stacked state vector
///   dynamic:   per generator (delta, omega, e_q', e_d')
///   algebraic: per generator (p_g, q_g), then per bus (v, theta).
class StateLayout {
public:
    StateLayout() = default;
    StateLayout(int n_generators, int n_buses);

    int n_gen() const { return n_gen_; }
    int n_bus() const { return n_bus_; }
    int n_dynamic() const { return 4 * n_gen_; }
    int n_algebraic() const { return 2 * n_gen_ + 2 * n_bus_; }
    int n_total() const { return n_dynamic() + n_algebraic(); }

    int delta(int g) const { return 4 * g; }
    int omega(int g) const { return 4 * g + 1; }
    int e_q(int g) const { return 4 * g + 2; }
    int e_d(int g) const { return 4 * g + 3; }

    int p_g(int g) const { return n_dynamic() + 2 * g; }
    int q_g(int g) const { return n_dynamic() + 2 * g + 1; }
    int v(int b) const { return n_dynamic() + 2 * n_gen_ + 2 * b; }
    int theta(int b) const { return n_dynamic() + 2 * n_gen_ + 2 * b + 1; }

    /// True for rows advanced by integration (identity rows of the singular
    /// mass structure), false for algebraic rows.
    bool is_differential(int i) const { return i < n_dynamic(); }

    /// Human-readable state names in layout order (used for CSV headers).
    std::vector<std::string> state_names(const GridCase& grid) const;

private:
    int n_gen_ = 0;
    int n_bus_ = 0;
};

/// Per-generator dynamic sub-state, convenient for packing tests and
/// initialization code.
struct GeneratorState {
    double delta = 0.0;
    double omega = 0.0;
    double e_q = 0.0;
    double e_d = 0.0;
};

Eigen::VectorXd pack_state(const StateLayout& layout,
                           const std::vector<GeneratorState>& gen_states,
                           const Eigen::VectorXd& p_g, const Eigen::VectorXd& q_g,
                           const Eigen::VectorXd& v, const Eigen::VectorXd& theta);

void unpack_state(const StateLayout& layout, const Eigen::VectorXd& x,
                  std::vector<GeneratorState>& gen_states,
                  Eigen::VectorXd& p_g, Eigen::VectorXd& q_g,
                  Eigen::VectorXd& v, Eigen::VectorXd& theta);

} // namespace gridsec
