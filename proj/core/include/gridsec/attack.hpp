#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridsec/constraints.hpp"
#include "gridsec/zone.hpp"

namespace gridsec {

class AttackError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AttackStrategy { ScuaCusumAgg, ScuaCusumVec, ScuaChi2, ScaaOpt, Icaa };
enum class AttackPlacement { PreSe, PostSe };
enum class EstimatorMethod { ObserverStep, PseudoInverse };
enum class DetectorType { Chi2, CusumAgg, CusumVec };

/// A crafted measurement injection and the residual it steers the detector
/// to. With direct application (y* = y + a) the post-attack residual equals
/// `target` exactly; under masking or post-estimation placement the target is
/// the input to the corresponding propagation.
struct StealthInjection {
    Eigen::VectorXd a;
    Eigen::VectorXd target;
};

struct ScuaOptions {
    /// Restrict the injection to the selected measurements. The closed forms
    /// cancel the full residual vector; masking keeps the injection on the
    /// selection support at the price of an approximate statistic.
    bool masked = false;
    /// Sign choice for the per-measurement variant.
    bool sign_plus = true;
};

/// Injection holding the aggregated-CUSUM statistic at its threshold: on the
/// first attacked step the designed distance measure is tau + b - c_prev,
/// afterwards b, spread uniformly over the n selected measurements through
/// the covariance square root. The designed vector is trimmed by a few ulps
/// so the detector's own arithmetic never rounds the statistic above target.
StealthInjection scua_cusum_agg(const Eigen::VectorXd& r, double c_prev, double tau, double b,
                                const Eigen::MatrixXd& sigma_sqrt,
                                const Eigen::MatrixXd& sigma_inv,
                                const std::vector<int>& targets, bool first_step,
                                const ScuaOptions& opts = {});

/// Per-measurement CUSUM variant: each targeted component is steered to
/// +/-(tau_i + b_i - c_prev_i) on the first step and +/-b_i afterwards;
/// untargeted components are left untouched.
StealthInjection scua_cusum_vec(const Eigen::VectorXd& r, const Eigen::VectorXd& c_prev,
                                const Eigen::VectorXd& tau, const Eigen::VectorXd& b,
                                const std::vector<int>& targets, bool first_step,
                                const ScuaOptions& opts = {});

/// Injection pinning the quadratic detector at its threshold alpha.
StealthInjection scua_chi2(const Eigen::VectorXd& r, double alpha,
                           const Eigen::MatrixXd& sigma_sqrt, const Eigen::MatrixXd& sigma_inv,
                           const std::vector<int>& targets, const ScuaOptions& opts = {});

/// Account for one estimator update when detection runs after estimation:
/// a = M^{-1} (target - r) with M = I + dt C L. Errors out when M is
/// numerically singular (condition number above 1e12).
Eigen::VectorXd propagate_post_se(const Eigen::VectorXd& target_residual,
                                  const Eigen::VectorXd& r, const Eigen::MatrixXd& gain,
                                  const Eigen::MatrixXd& c, double dt);

/// Literal pseudo-inverse state update xhat* = xhat_prev + C^+ y*. Requires
/// full row rank of C.
Eigen::VectorXd pseudo_inverse_estimate(const Eigen::MatrixXd& c,
                                        const Eigen::VectorXd& xhat_prev,
                                        const Eigen::VectorXd& y_star);

/// Exact checks shared by the constraint-aware strategies. `estimator` maps a
/// candidate attacked measurement to the attacked estimate; `detector_stat`
/// evaluates the victim statistic on a candidate residual against a cloned
/// detector state (probing never mutates the victim).
struct ConstraintAwareChecks {
    const ConstraintEvaluator* constraints = nullptr;
    std::vector<int> g_rows; // empty = all rows
    std::vector<int> h_rows; // empty = all rows
    double zeta = 0.0;
    double gamma = 0.0; // detector budget (tau or alpha)
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> estimator;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
        residual_for; // (y*, xhat*) -> detector residual
    std::function<double(const Eigen::VectorXd&)> detector_stat;

    struct Outcome {
        bool ok = false;
        double g_abs_sum = 0.0;
        int h_violations = 0;
        double stat = 0.0;
    };
    Outcome evaluate(const Eigen::VectorXd& y_star, const Eigen::VectorXd& xhat_star) const;
};

struct IcaaParams {
    double beta = 0.01;
    int n_max = 100;
};

struct IcaaResult {
    Eigen::VectorXd a;
    Eigen::VectorXd xhat_star;
    int iterations = 0;
    bool feasible = false;
    ConstraintAwareChecks::Outcome last;
};

/// Iterative constraint-aware refinement: starting from a detector-evading
/// injection, geometrically shrink by (1 - beta) until the attacked estimate
/// passes the equality tolerance, the operational limits, and the detector
/// budget; revert to no attack when the iteration budget is exhausted.
IcaaResult icaa(const Eigen::VectorXd& y, const Eigen::VectorXd& a_init,
                const ConstraintAwareChecks& checks, const IcaaParams& params);

struct ScaaProblem {
    std::vector<int> targets;
    Eigen::VectorXd y;
    Eigen::VectorXd r;          // detector-stream residual before the attack
    Eigen::VectorXd xhat_base;  // attacked estimate at a = 0
    Eigen::MatrixXd d_mat;      // d xhat* / d a_targeted (affine estimator model)
    Eigen::VectorXd xhat0;      // constraint linearization point
    ConstraintLinearization lin;
    Eigen::VectorXd box_u;          // per-target bound on |r_i + a_i| from the detector budget
    ConstraintAwareChecks checks;   // exact verification of the solved point
};

struct ScaaResult {
    Eigen::VectorXd a;
    Eigen::VectorXd xhat_star;
    bool feasible = false;
    bool solver_failure = false;
    double objective = 0.0;
    ConstraintAwareChecks::Outcome last;
};

/// Linearized magnitude-maximizing synthesis: the absolute-value objective is
/// split (a = a+ - a-), the equality-sum and operational limits enter as
/// linearized rows, and the quadratic detector budget is enforced through
/// per-component bounds. The LP solution is then verified against the exact
/// nonlinear checks and scaled back as needed.
ScaaResult scaa_optimize(const ScaaProblem& prob);

} // namespace gridsec
