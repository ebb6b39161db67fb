#include "gridsec/observer.hpp"

#include <cmath>

namespace gridsec {

Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& xhat,
                         const Eigen::MatrixXd& c) {
    if (y.size() != c.rows() || xhat.size() != c.cols())
        throw ObserverError("residual dimension mismatch");
    return y - c * xhat;
}

JointObserver::JointObserver(const DescriptorSystem& sys, ObserverConfig cfg, StepOptions opts)
    : sys_(sys), cfg_(std::move(cfg)), opts_(opts) {
    const int n = sys_.n_total();
    const int p = sys_.n_measurements();
    if (cfg_.gain.rows() != n || cfg_.gain.cols() != p)
        throw ObserverError("observer gain must be " + std::to_string(n) + "x" +
                            std::to_string(p) + ", got " + std::to_string(cfg_.gain.rows()) +
                            "x" + std::to_string(cfg_.gain.cols()));
    if (cfg_.dt <= 0.0) throw ObserverError("observer dt must be positive");
    l_dyn_ = cfg_.gain.topRows(sys_.n_dynamic());
    l_alg_ = cfg_.gain.bottomRows(sys_.n_algebraic());
}

Eigen::VectorXd JointObserver::solve_step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& u, const Eigen::VectorXd& q,
                                          double dt,
                                          const Eigen::PartialPivLU<Eigen::MatrixXd>* frozen,
                                          const Eigen::VectorXd* f_old_pre) const {
    const int nd = sys_.n_dynamic();
    const int na = sys_.n_algebraic();
    const int n = nd + na;
    const Eigen::MatrixXd& c = sys_.measurement_matrix();

    // Old-endpoint dynamic RHS including the injection at the held y.
    Eigen::VectorXd f_old = f_old_pre ? *f_old_pre : sys_.dynamic_rhs(xhat, u);
    f_old += l_dyn_ * (y - c * xhat);

    auto residual_fn = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd innov = y - c * z;
        Eigen::VectorXd r(n);
        r.head(nd) = z.head(nd) - xhat.head(nd) -
                     0.5 * dt * (f_old + sys_.dynamic_rhs(z, u) + l_dyn_ * innov);
        r.tail(na) = sys_.algebraic_residual(z, q) + l_alg_ * innov;
        return r;
    };

    Eigen::VectorXd z = xhat;
    Eigen::VectorXd res = residual_fn(z);
    double best = res.cwiseAbs().maxCoeff();

    Eigen::PartialPivLU<Eigen::MatrixXd> local_lu;
    const Eigen::PartialPivLU<Eigen::MatrixXd>* lu = frozen;
    bool fresh = false;
    auto rebuild = [&](const Eigen::VectorXd& at) {
        Eigen::MatrixXd jac(n, n);
        jac.topRows(nd) = -0.5 * dt * (sys_.dynamic_jacobian(at) - l_dyn_ * c);
        jac.topRows(nd).leftCols(nd) += Eigen::MatrixXd::Identity(nd, nd);
        jac.bottomRows(na) = sys_.algebraic_jacobian(at) - l_alg_ * c;
        local_lu.compute(jac);
        lu = &local_lu;
        fresh = true;
    };
    if (lu == nullptr) rebuild(z);
    for (int it = 0; it < opts_.max_newton_iter && best >= opts_.newton_tol; ++it) {
        const Eigen::VectorXd dz = lu->solve(-res);
        bool improved = false;
        double alpha = 1.0;
        const double prev = best;
        for (int ls = 0; ls < 7; ++ls, alpha *= 0.5) {
            Eigen::VectorXd cand = z + alpha * dz;
            Eigen::VectorXd cand_res = residual_fn(cand);
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
            rebuild(z);
        } else {
            break;
        }
    }
    if (best >= opts_.consistency_tol)
        throw ObserverError("observer step did not converge (residual " + std::to_string(best) +
                            ")");
    return z;
}

Eigen::VectorXd JointObserver::step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& q_bar) const {
    return robust_step(xhat, y, u, q_bar, cfg_.dt, 0);
}

Eigen::VectorXd JointObserver::robust_step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& u, const Eigen::VectorXd& q,
                                           double dt, int depth) const {
    try {
        return solve_step(xhat, y, u, q, dt, nullptr, nullptr);
    } catch (const ObserverError&) {
        // Transients with a strong injection can defeat the full-step solve;
        // two half steps tame the nonlinearity. The measurement stays held.
        if (depth >= 5) throw;
        Eigen::VectorXd mid = robust_step(xhat, y, u, q, 0.5 * dt, depth + 1);
        return robust_step(mid, y, u, q, 0.5 * dt, depth + 1);
    }
}

JointObserver::Prepared JointObserver::prepare(const Eigen::VectorXd& xhat,
                                               const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& q_bar) const {
    const int nd = sys_.n_dynamic();
    const int na = sys_.n_algebraic();
    const int n = nd + na;
    const Eigen::MatrixXd& c = sys_.measurement_matrix();

    Prepared prep;
    prep.parent_ = this;
    prep.xhat_ = xhat;
    prep.u_ = u;
    prep.q_ = q_bar;
    prep.f_old_base_ = sys_.dynamic_rhs(xhat, u);

    Eigen::MatrixXd jac(n, n);
    jac.topRows(nd) = -0.5 * cfg_.dt * (sys_.dynamic_jacobian(xhat) - l_dyn_ * c);
    jac.topRows(nd).leftCols(nd) += Eigen::MatrixXd::Identity(nd, nd);
    jac.bottomRows(na) = sys_.algebraic_jacobian(xhat) - l_alg_ * c;
    prep.lu_.compute(jac);
    return prep;
}

Eigen::VectorXd JointObserver::Prepared::step(const Eigen::VectorXd& y) const {
    try {
        return parent_->solve_step(xhat_, y, u_, q_, parent_->cfg_.dt, &lu_, &f_old_base_);
    } catch (const ObserverError&) {
        // Fall back to the fully robust path when the frozen factorization
        // cannot carry an aggressive candidate.
        return parent_->robust_step(xhat_, y, u_, q_, parent_->cfg_.dt, 0);
    }
}

Eigen::MatrixXd estimate_sigma(const Eigen::MatrixXd& residual_history) {
    const Eigen::Index k = residual_history.rows();
    const Eigen::Index p = residual_history.cols();
    if (k < 10 * p)
        throw ObserverError("insufficient residual history: " + std::to_string(k) +
                            " samples for dimension " + std::to_string(p));
    const Eigen::RowVectorXd mean = residual_history.colwise().mean();
    const Eigen::MatrixXd centered = residual_history.rowwise() - mean;
    Eigen::MatrixXd sigma = centered.transpose() * centered / static_cast<double>(k - 1);
    sigma = 0.5 * (sigma + sigma.transpose());
    sigma += 1e-8 * Eigen::MatrixXd::Identity(p, p);
    return sigma;
}

} // namespace gridsec
