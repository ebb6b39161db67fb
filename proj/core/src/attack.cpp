#include "gridsec/attack.hpp"

#include <cmath>

#include "gridsec/simplex.hpp"

namespace gridsec {

namespace {

Eigen::VectorXd masked_selection(const std::vector<int>& targets, Eigen::Index p) {
    Eigen::VectorXd sel = Eigen::VectorXd::Zero(p);
    for (int i : targets) {
        if (i < 0 || i >= p) throw AttackError("measurement index out of range");
        sel[i] = 1.0;
    }
    return sel;
}

double quad_form(const Eigen::MatrixXd& sigma_inv, const Eigen::VectorXd& r) {
    return r.dot(sigma_inv * r);
}

// Build the injection for a designed residual and, in the unmasked case,
// shrink the design by ulp-sized steps until the statistic evaluated on the
// realized residual r + a (the value the detector will accumulate) stays at
// or below the budget. Masked injections are approximate by construction.
StealthInjection craft_quadratic(Eigen::VectorXd designed, const Eigen::VectorXd& r,
                                 const Eigen::MatrixXd& sigma_inv, double budget,
                                 const std::vector<int>& targets, bool masked) {
    StealthInjection out;
    if (masked) {
        out.a = Eigen::VectorXd::Zero(r.size());
        for (int i : targets) out.a[i] = designed[i] - r[i];
        out.target = r + out.a;
        return out;
    }
    for (int i = 0; i < 100; ++i) {
        out.a = designed - r;
        out.target = r + out.a;
        if (quad_form(sigma_inv, out.target) <= budget) return out;
        designed *= (1.0 - 1e-14);
    }
    throw AttackError("could not trim the designed residual to the detector budget");
}

} // namespace

StealthInjection scua_cusum_agg(const Eigen::VectorXd& r, double c_prev, double tau, double b,
                                const Eigen::MatrixXd& sigma_sqrt,
                                const Eigen::MatrixXd& sigma_inv,
                                const std::vector<int>& targets, bool first_step,
                                const ScuaOptions& opts) {
    if (targets.empty()) throw AttackError("attack requires at least one selected measurement");
    const double budget = first_step ? (tau + b - c_prev) : b;
    if (budget < 0.0)
        throw AttackError("inconsistent detector state: c_prev exceeds tau + b");

    const double n = static_cast<double>(targets.size());
    const Eigen::VectorXd sel = masked_selection(targets, r.size());
    const Eigen::VectorXd designed = sigma_sqrt * (sel * std::sqrt(budget / n));
    return craft_quadratic(designed, r, sigma_inv, budget, targets, opts.masked);
}

StealthInjection scua_cusum_vec(const Eigen::VectorXd& r, const Eigen::VectorXd& c_prev,
                                const Eigen::VectorXd& tau, const Eigen::VectorXd& b,
                                const std::vector<int>& targets, bool first_step,
                                const ScuaOptions& opts) {
    if (targets.empty()) throw AttackError("attack requires at least one selected measurement");
    const Eigen::Index p = r.size();
    if (c_prev.size() != p || tau.size() != p || b.size() != p)
        throw AttackError("per-measurement detector parameters have wrong shape");

    const double sign = opts.sign_plus ? 1.0 : -1.0;
    StealthInjection out;
    out.a = Eigen::VectorXd::Zero(p);
    out.target = r;
    for (int i : targets) {
        if (i < 0 || i >= p) throw AttackError("measurement index out of range");
        double level = first_step ? (tau[i] + b[i] - c_prev[i]) : b[i];
        if (level < 0.0)
            throw AttackError("inconsistent detector state on component " + std::to_string(i));
        // Keep |r_i + a_i| at or below the designed level in the detector's
        // own arithmetic.
        double t = sign * level;
        for (int guard = 0; guard < 100 && std::abs(r[i] + (t - r[i])) > level; ++guard)
            t *= (1.0 - 1e-14);
        out.a[i] = t - r[i];
        out.target[i] = r[i] + out.a[i];
    }
    return out;
}

StealthInjection scua_chi2(const Eigen::VectorXd& r, double alpha,
                           const Eigen::MatrixXd& sigma_sqrt, const Eigen::MatrixXd& sigma_inv,
                           const std::vector<int>& targets, const ScuaOptions& opts) {
    if (targets.empty()) throw AttackError("attack requires at least one selected measurement");
    if (alpha <= 0.0) throw AttackError("detector threshold must be positive");

    const double n = static_cast<double>(targets.size());
    const Eigen::VectorXd sel = masked_selection(targets, r.size());
    const Eigen::VectorXd designed = sigma_sqrt * (sel * std::sqrt(alpha / n));
    return craft_quadratic(designed, r, sigma_inv, alpha, targets, opts.masked);
}

Eigen::VectorXd propagate_post_se(const Eigen::VectorXd& target_residual,
                                  const Eigen::VectorXd& r, const Eigen::MatrixXd& gain,
                                  const Eigen::MatrixXd& c, double dt) {
    const Eigen::Index p = r.size();
    if (target_residual.size() != p) throw AttackError("target residual dimension mismatch");
    if (c.rows() != p || gain.cols() != p || gain.rows() != c.cols())
        throw AttackError("gain/measurement dimension mismatch");

    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p) + dt * c * gain;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin <= 0.0 || smax / smin > 1e12)
        throw AttackError("estimator propagation matrix is numerically singular");
    return svd.solve(target_residual - r);
}

Eigen::VectorXd pseudo_inverse_estimate(const Eigen::MatrixXd& c,
                                        const Eigen::VectorXd& xhat_prev,
                                        const Eigen::VectorXd& y_star) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(c);
    if (cod.rank() < c.rows())
        throw AttackError("measurement matrix is rank deficient; pseudo-inverse update "
                          "unavailable");
    return xhat_prev + cod.pseudoInverse() * y_star;
}

ConstraintAwareChecks::Outcome
ConstraintAwareChecks::evaluate(const Eigen::VectorXd& y_star,
                                const Eigen::VectorXd& xhat_star) const {
    Outcome out;
    const Eigen::VectorXd g = constraints->g(xhat_star);
    if (g_rows.empty()) {
        out.g_abs_sum = std::abs(g.sum());
    } else {
        double s = 0.0;
        for (int i : g_rows) s += g[i];
        out.g_abs_sum = std::abs(s);
    }
    const Eigen::VectorXd h = constraints->h(xhat_star);
    if (h_rows.empty()) {
        out.h_violations = static_cast<int>((h.array() > 0.0).count());
    } else {
        for (int i : h_rows)
            if (h[i] > 0.0) ++out.h_violations;
    }
    out.stat = detector_stat(residual_for(y_star, xhat_star));
    out.ok = out.g_abs_sum <= zeta && out.h_violations == 0 && out.stat <= gamma;
    return out;
}

IcaaResult icaa(const Eigen::VectorXd& y, const Eigen::VectorXd& a_init,
                const ConstraintAwareChecks& checks, const IcaaParams& params) {
    if (params.beta <= 0.0 || params.beta >= 1.0)
        throw AttackError("icaa scaling factor must lie in (0, 1)");
    if (params.n_max < 1) throw AttackError("icaa iteration budget must be at least 1");

    IcaaResult result;
    Eigen::VectorXd a = a_init;
    Eigen::VectorXd y_star = y + a;
    Eigen::VectorXd xhat_star = checks.estimator(y_star);

    for (int i = 1; i <= params.n_max; ++i) {
        const auto outcome = checks.evaluate(y_star, xhat_star);
        if (outcome.ok) {
            result.a = a;
            result.xhat_star = xhat_star;
            result.iterations = i;
            result.feasible = true;
            result.last = outcome;
            return result;
        }
        a *= (1.0 - params.beta);
        y_star = y + a;
        xhat_star = checks.estimator(y_star);
    }

    // Exhausted: revert to no attack.
    result.a = Eigen::VectorXd::Zero(y.size());
    result.xhat_star = checks.estimator(y);
    result.iterations = params.n_max;
    result.feasible = false;
    result.last = checks.evaluate(y, result.xhat_star);
    return result;
}

ScaaResult scaa_optimize(const ScaaProblem& prob) {
    ScaaResult result;
    const int nt = static_cast<int>(prob.targets.size());
    const Eigen::Index p = prob.y.size();
    if (nt == 0) throw AttackError("attack requires at least one selected measurement");
    if (prob.box_u.size() != nt) throw AttackError("box_u must have one entry per target");
    const Eigen::VectorXd& u = prob.box_u;

    // Variables: a = a+ - a-, both >= 0, listed per target.
    const int nv = 2 * nt;
    // Rows: per-target upper/lower detector bounds, two equality-sum rows,
    // linearized limit rows.
    const Eigen::MatrixXd h_jac = prob.checks.constraints->h_jacobian(prob.xhat0);
    const Eigen::VectorXd h0 = prob.checks.constraints->h(prob.xhat0);
    const std::vector<int>& h_rows = prob.checks.h_rows;
    const int nh = h_rows.empty() ? static_cast<int>(h0.size())
                                  : static_cast<int>(h_rows.size());

    const int nrows = 2 * nt + 2 + nh;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nrows, nv);
    Eigen::VectorXd rhs(nrows);
    Eigen::VectorXd cobj = Eigen::VectorXd::Ones(nv);

    // |r_i + a_i| <= u_i as two rows per target.
    for (int t = 0; t < nt; ++t) {
        const int i = prob.targets[t];
        A(2 * t, t) = 1.0;
        A(2 * t, nt + t) = -1.0;
        rhs[2 * t] = u[t] - prob.r[i];
        A(2 * t + 1, t) = -1.0;
        A(2 * t + 1, nt + t) = 1.0;
        rhs[2 * t + 1] = u[t] + prob.r[i];
    }

    // Equality-sum tolerance: |sum g_L(xhat*(a))| <= zeta. With the affine
    // estimate model xhat*(a) = xhat_base + D a and g_L the first-order model
    // about xhat0, the constraint is s0 + w^T D a in [-zeta, zeta].
    Eigen::VectorXd w;
    double s0 = 0.0;
    {
        const Eigen::MatrixXd& grad = prob.lin.grad_g;
        Eigen::RowVectorXd wt;
        if (prob.checks.g_rows.empty()) {
            wt = grad.colwise().sum();
            s0 = prob.lin.g0.sum();
        } else {
            wt = Eigen::RowVectorXd::Zero(grad.cols());
            for (int i : prob.checks.g_rows) {
                wt += grad.row(i);
                s0 += prob.lin.g0[i];
            }
        }
        s0 += wt.dot(prob.xhat_base - prob.xhat0);
        w = (wt * prob.d_mat).transpose();
    }
    const int er = 2 * nt;
    for (int t = 0; t < nt; ++t) {
        A(er, t) = w[t];
        A(er, nt + t) = -w[t];
        A(er + 1, t) = -w[t];
        A(er + 1, nt + t) = w[t];
    }
    rhs[er] = prob.checks.zeta - s0;
    rhs[er + 1] = prob.checks.zeta + s0;

    // Linearized operational limits: h0 + Hjac (xhat* - xhat0) <= 0.
    for (int k = 0; k < nh; ++k) {
        const int row = h_rows.empty() ? k : h_rows[k];
        const Eigen::RowVectorXd hr = h_jac.row(row);
        const double base = h0[row] + hr.dot(prob.xhat_base - prob.xhat0);
        const Eigen::RowVectorXd hd = hr * prob.d_mat;
        for (int t = 0; t < nt; ++t) {
            A(er + 2 + k, t) = hd[t];
            A(er + 2 + k, nt + t) = -hd[t];
        }
        rhs[er + 2 + k] = -base;
    }

    const LpResult lp = solve_lp_max(cobj, A, rhs);
    if (lp.status == LpStatus::NumericalFailure || lp.status == LpStatus::Unbounded) {
        result.solver_failure = true;
        result.a = Eigen::VectorXd::Zero(p);
        result.xhat_star = prob.checks.estimator(prob.y);
        result.last = prob.checks.evaluate(prob.y, result.xhat_star);
        return result;
    }

    Eigen::VectorXd a_full = Eigen::VectorXd::Zero(p);
    if (lp.status == LpStatus::Optimal) {
        for (int t = 0; t < nt; ++t)
            a_full[prob.targets[t]] = lp.x[t] - lp.x[nt + t];
    }

    // Exact verification with a geometric backoff; an infeasible program or a
    // point that never verifies degrades to no attack.
    double scale = 1.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
        const Eigen::VectorXd a = a_full * scale;
        const Eigen::VectorXd y_star = prob.y + a;
        const Eigen::VectorXd xhat_star = prob.checks.estimator(y_star);
        const auto outcome = prob.checks.evaluate(y_star, xhat_star);
        if (outcome.ok) {
            result.a = a;
            result.xhat_star = xhat_star;
            result.feasible = true;
            result.objective = a.cwiseAbs().sum();
            result.last = outcome;
            return result;
        }
        if (lp.status == LpStatus::Infeasible) break;
        scale *= 0.7;
    }

    result.a = Eigen::VectorXd::Zero(p);
    result.xhat_star = prob.checks.estimator(prob.y);
    result.feasible = false;
    result.last = prob.checks.evaluate(prob.y, result.xhat_star);
    return result;
}

} // namespace gridsec
