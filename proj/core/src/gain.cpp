#include "gridsec/observer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gridsec/rng.hpp"

namespace gridsec {

Eigen::MatrixXd load_gain(const std::filesystem::path& path, int n, int p) {
    std::ifstream in(path);
    if (!in) throw ObserverError("cannot open gain file " + path.string());
    int rows = 0, cols = 0;
    in >> rows >> cols;
    if (!in) throw ObserverError("gain file missing 'n p' header: " + path.string());
    if (rows != n || cols != p)
        throw ObserverError("gain file is " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", expected " + std::to_string(n) + "x" + std::to_string(p));
    Eigen::MatrixXd gain(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            if (!(in >> gain(i, j)))
                throw ObserverError("gain file truncated at row " + std::to_string(i));
        }
    return gain;
}

void save_gain(const std::filesystem::path& path, const Eigen::MatrixXd& gain) {
    std::ofstream out(path);
    if (!out) throw ObserverError("cannot write gain file " + path.string());
    out << gain.rows() << " " << gain.cols() << "\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < gain.rows(); ++i) {
        for (Eigen::Index j = 0; j < gain.cols(); ++j)
            out << gain(i, j) << (j + 1 == gain.cols() ? "" : " ");
        out << "\n";
    }
}

Eigen::MatrixXd synthesize_gain(const DescriptorSystem& sys, const GainSynthesisOptions& opts) {
    const int nd = sys.n_dynamic();
    const int na = sys.n_algebraic();
    const int p = sys.n_measurements();
    const Eigen::VectorXd& x0 = sys.operating_point();
    const Eigen::MatrixXd& c = sys.measurement_matrix();

    // Linearize and eliminate algebraic variables: x_a = -Jaa^{-1} Jad x_d.
    const Eigen::MatrixXd jd = sys.dynamic_jacobian(x0);
    const Eigen::MatrixXd ja = sys.algebraic_jacobian(x0);
    const Eigen::MatrixXd jdd = jd.leftCols(nd);
    const Eigen::MatrixXd jda = jd.rightCols(na);
    const Eigen::MatrixXd jad = ja.leftCols(nd);
    const Eigen::MatrixXd jaa = ja.rightCols(na);

    Eigen::PartialPivLU<Eigen::MatrixXd> jaa_lu(jaa);
    const Eigen::MatrixXd sens = -jaa_lu.solve(jad); // d x_a / d x_d
    const Eigen::MatrixXd a_red = jdd + jda * sens;
    const Eigen::MatrixXd c_red = c.leftCols(nd) + c.rightCols(na) * sens;

    // Structural sink states (zero measurement column and no influence on any
    // other state) cannot be moved by output injection. Their error dynamics
    // already decay on their own, so they are excluded from the placement and
    // receive zero gain rows.
    const double a_scale = a_red.cwiseAbs().maxCoeff();
    const double c_scale = std::max(c_red.cwiseAbs().maxCoeff(), 1.0);
    std::vector<int> placed;
    for (int j = 0; j < nd; ++j) {
        double off_diag = 0.0;
        for (int i = 0; i < nd; ++i)
            if (i != j) off_diag = std::max(off_diag, std::abs(a_red(i, j)));
        const double c_col = c_red.col(j).cwiseAbs().maxCoeff();
        const bool sink = off_diag < 1e-9 * a_scale && c_col < 1e-9 * c_scale;
        if (!sink) placed.push_back(j);
    }
    const int no = static_cast<int>(placed.size());
    if (no == 0) throw ObserverError("no observable dynamic states to place poles on");

    // Measurement channels carry very different scales (line-current rows
    // have admittance-sized coefficients); normalize rows for the design and
    // fold the scaling back into the final gain.
    Eigen::VectorXd row_scale(p);
    for (int i = 0; i < p; ++i) row_scale[i] = std::max(c_red.row(i).norm(), 1e-9);

    Eigen::MatrixXd a_obs(no, no);
    Eigen::MatrixXd c_obs(p, no);
    for (int i = 0; i < no; ++i) {
        c_obs.col(i) = c_red.col(placed[i]);
        for (int j = 0; j < no; ++j) a_obs(i, j) = a_red(placed[i], placed[j]);
    }
    c_obs.array().colwise() /= row_scale.array();

    // Slowest nonzero observable mode sets the bandwidth target; the rigid
    // rotation zero mode of the multi-machine model is skipped.
    Eigen::EigenSolver<Eigen::MatrixXd> es(a_obs);
    const Eigen::VectorXcd plant = es.eigenvalues();
    double slowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < plant.size(); ++i) {
        const double re = std::abs(plant[i].real());
        if (re > opts.zero_mode_tol && re < slowest) slowest = re;
    }
    if (!std::isfinite(slowest))
        throw ObserverError("reduced dynamics have no nonzero modes to scale poles from");
    const double rate = opts.pole_multiple * slowest;

    // Output injection via a stationary Riccati gain on the scaled outputs.
    // The process-noise weight is swept geometrically until every observable
    // error mode decays at least as fast as the target rate; Riccati
    // directions stay well conditioned where raw pole placement does not.
    const double dt = 0.01;
    const Eigen::MatrixXd ad =
        (Eigen::MatrixXd::Identity(no, no) - 0.5 * dt * a_obs).partialPivLu().solve(
            Eigen::MatrixXd::Identity(no, no) + 0.5 * dt * a_obs);
    const Eigen::MatrixXd rd = Eigen::MatrixXd::Identity(p, p) / dt;

    Eigen::MatrixXd l_obs;
    double best_rate = -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd best_l;
    Eigen::MatrixXd pcov; // warm-started across the sweep
    for (double q = 1e-6; q < 1e7; q *= 10.0) {
        const Eigen::MatrixXd qd = q * dt * Eigen::MatrixXd::Identity(no, no);
        if (pcov.size() == 0) pcov = qd;
        for (int it = 0; it < 20000; ++it) {
            const Eigen::MatrixXd s = c_obs * pcov * c_obs.transpose() + rd;
            const Eigen::MatrixXd k = s.llt().solve(c_obs * pcov).transpose();
            const Eigen::MatrixXd pnew =
                ad * (pcov - k * c_obs * pcov) * ad.transpose() + qd;
            const double delta = (pnew - pcov).cwiseAbs().maxCoeff() /
                                 std::max(1e-30, pcov.cwiseAbs().maxCoeff());
            pcov = 0.5 * (pnew + pnew.transpose());
            if (delta < 3e-12 && it > 20) break;
        }
        const Eigen::MatrixXd s = c_obs * pcov * c_obs.transpose() + rd;
        const Eigen::MatrixXd l_cand =
            (s.llt().solve(c_obs * pcov)).transpose() / dt; // continuous-time gain

        Eigen::EigenSolver<Eigen::MatrixXd> cl(a_obs - l_cand * c_obs);
        const double max_re = cl.eigenvalues().real().maxCoeff();
        if (max_re >= -1e-9) continue;
        double min_decay = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < cl.eigenvalues().size(); ++i)
            min_decay = std::min(min_decay, -cl.eigenvalues()[i].real());
        if (min_decay > best_rate) {
            best_rate = min_decay;
            best_l = l_cand;
        }
        if (min_decay >= rate) break;
    }
    if (best_l.size() == 0)
        throw ObserverError("gain synthesis failed: no stabilizing injection found");
    l_obs = best_l;

    // Fold the output scaling back and lift to the full state. Algebraic
    // rows: L_a = -eta J_ad L_d displaces the algebraic states along the
    // constraint-manifold tangent of the dynamic correction (the implied
    // offset is -eta sens L_d innov, with no inverse amplification), so the
    // estimate trades constraint satisfaction against measurement fit.
    double eta = opts.algebraic_coupling;
    for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(nd + na, p);
        for (int i = 0; i < no; ++i)
            gain.row(placed[i]) = l_obs.row(i).cwiseQuotient(row_scale.transpose());
        gain.bottomRows(na) = -eta * (jad * gain.topRows(nd));

        // Verify the complete error loop, algebraic injection included.
        const Eigen::MatrixXd la = gain.bottomRows(na);
        const Eigen::MatrixXd ld = gain.topRows(nd);
        const Eigen::MatrixXd jaa_eff = jaa - la * c.rightCols(na);
        const Eigen::MatrixXd jad_eff = jad - la * c.leftCols(nd);
        const Eigen::MatrixXd sens_eff = -jaa_eff.partialPivLu().solve(jad_eff);
        const Eigen::MatrixXd a_cl = (jdd - ld * c.leftCols(nd)) +
                                     (jda - ld * c.rightCols(na)) * sens_eff;
        Eigen::EigenSolver<Eigen::MatrixXd> cl(a_cl);
        if (cl.eigenvalues().real().maxCoeff() < -1e-4) return gain;
        eta *= 0.5; // weaken the constraint-row injection until stable
    }
    throw ObserverError("gain synthesis failed: algebraic coupling destabilizes the loop");
}
GainValidation validate_gain(const DescriptorSystem& sys, const Eigen::MatrixXd& gain,
                             double dt, double horizon, double perturbation,
                             double required_contraction) {
    const int n = sys.n_total();
    const Eigen::VectorXd& x0 = sys.operating_point();
    const Eigen::VectorXd& u0 = sys.nominal_input();
    const Eigen::VectorXd& q0 = sys.nominal_disturbance();

    // Perturb the machine angles and voltages, then restore consistency.
    Eigen::VectorXd xhat = x0;
    const StateLayout& L = sys.layout();
    for (int g = 0; g < L.n_gen(); ++g) {
        xhat[L.delta(g)] += perturbation;
        xhat[L.e_q(g)] += 0.5 * perturbation;
    }
    xhat = sys.solve_algebraic(xhat, q0);

    ObserverConfig cfg;
    cfg.gain = gain;
    cfg.dt = dt;
    cfg.initial_estimate = xhat;
    JointObserver obs(sys, cfg);

    GainValidation result;
    result.initial_error = (xhat - x0).norm();

    // Truth stays at the steady state; measurements are noise-free.
    const Eigen::VectorXd y = sys.measurement_matrix() * x0;
    const int steps = static_cast<int>(std::llround(horizon / dt));
    Eigen::VectorXd est = xhat;
    for (int k = 0; k < steps; ++k) {
        est = obs.step(est, y, u0, q0);
        if (!est.allFinite()) {
            result.final_error = std::numeric_limits<double>::infinity();
            result.passed = false;
            return result;
        }
    }
    result.final_error = (est - x0).norm();
    result.passed = result.final_error < required_contraction * result.initial_error;
    (void)n;
    return result;
}

} // namespace gridsec
