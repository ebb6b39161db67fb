#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gridsec/descriptor.hpp"

namespace gridsec {

/// Snapshot of the physical-plausibility checks at one state.
struct ConstraintReport {
    Eigen::VectorXd g_values; // equality residuals (stator + power balance)
    Eigen::VectorXd h_values; // operational limits as slacks, <= 0 satisfied
    double g_abs_sum = 0.0;   // |sum of g entries|
    int violation_count = 0;  // h entries > 0, plus 1 when g_abs_sum > zeta
    double zeta = 0.0;
};

enum class LimitKind { PgMax, PgMin, QgMax, QgMin, VMax, VMin, FlowFrom, FlowTo };

struct LimitRow {
    LimitKind kind;
    int index; // generator, bus, or branch position depending on kind
};

/// Evaluates the equality constraints g (the algebraic equations at nominal
/// loads) and the inequality limits h over a state vector. Construct once
/// per system; evaluation is pure.
class ConstraintEvaluator {
public:
    explicit ConstraintEvaluator(const DescriptorSystem& sys);

    const DescriptorSystem& system() const { return *sys_; }
    const std::vector<LimitRow>& limit_rows() const { return rows_; }
    int n_g() const { return sys_->n_algebraic(); }
    int n_h() const { return static_cast<int>(rows_.size()); }

    Eigen::VectorXd g(const Eigen::VectorXd& x) const;
    Eigen::VectorXd h(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd g_jacobian(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd h_jacobian(const Eigen::VectorXd& x) const;

    ConstraintReport report(const Eigen::VectorXd& x, double zeta) const;

    /// Row subsets relevant to a set of buses (dense indices): generator
    /// rows for machines at those buses, voltage rows for the buses, flow
    /// rows for branches with both ends inside.
    std::vector<int> g_rows_for_buses(const std::vector<int>& bus_indices) const;
    std::vector<int> h_rows_for_buses(const std::vector<int>& bus_indices) const;

private:
    const DescriptorSystem* sys_;
    std::vector<LimitRow> rows_;
    std::vector<int> rated_branches_;
};

/// Convenience wrapper matching the module-level operation.
ConstraintReport eval_constraints(const ConstraintEvaluator& eval, const Eigen::VectorXd& x,
                                  double zeta);

struct ConstraintLinearization {
    Eigen::VectorXd g0;
    Eigen::MatrixXd grad_g; // Jacobian of g at the expansion point
};

/// First-order model of g about x0: g_L(x) = g0 + grad_g (x - x0).
ConstraintLinearization linearize_constraints(const ConstraintEvaluator& eval,
                                              const Eigen::VectorXd& x0);

} // namespace gridsec
