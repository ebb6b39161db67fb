#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "gridsec/descriptor.hpp"
#include "gridsec/sim.hpp"

namespace gridsec {

class ObserverError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ObserverConfig {
    Eigen::MatrixXd gain;            // L, n x p
    double dt = 0.01;                // must match the measurement cadence
    Eigen::VectorXd initial_estimate;
};

/// Time series kept by an estimation run.
struct EstimateTrace {
    Eigen::MatrixXd estimates;   // (K+1) x n
    Eigen::MatrixXd residuals;   // (K+1) x p, row k is y_k - C xhat_k
    Eigen::VectorXd error_norms; // (K+1), vs ground truth when available

    int n_samples() const { return static_cast<int>(estimates.rows()); }
};

/// r = y - C xhat.
Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& xhat,
                         const Eigen::MatrixXd& c);

/// Joint estimator: advances the descriptor model with the measurement
/// injection L(y - C xhat) added to the right-hand side, using the same
/// implicit trapezoidal scheme as the simulator. The nonlinearity is
/// evaluated at the estimate. The measurement is held over the step.
class JointObserver {
public:
    JointObserver(const DescriptorSystem& sys, ObserverConfig cfg, StepOptions opts = {});

    const ObserverConfig& config() const { return cfg_; }

    /// One observer step from xhat given the measurement y.
    Eigen::VectorXd step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& q_bar) const;

    /// Prepare a frozen-Jacobian solver at the current estimate, for cheap
    /// repeated steps from the same xhat under many candidate measurements
    /// (attack-synthesis inner loops). Chord iterations reuse one LU factor.
    class Prepared {
    public:
        Eigen::VectorXd step(const Eigen::VectorXd& y) const;

    private:
        friend class JointObserver;
        const JointObserver* parent_ = nullptr;
        Eigen::VectorXd xhat_, u_, q_;
        Eigen::VectorXd f_old_base_; // dynamic rhs at xhat without injection
        Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    };

    Prepared prepare(const Eigen::VectorXd& xhat, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& q_bar) const;

private:
    Eigen::VectorXd solve_step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& q, double dt,
                               const Eigen::PartialPivLU<Eigen::MatrixXd>* frozen,
                               const Eigen::VectorXd* f_old_pre) const;
    Eigen::VectorXd robust_step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& u, const Eigen::VectorXd& q, double dt,
                                int depth) const;

    const DescriptorSystem& sys_;
    ObserverConfig cfg_;
    StepOptions opts_;
    Eigen::MatrixXd l_dyn_, l_alg_; // gain split by row kind
};

/// Sample covariance of a residual history (rows are samples), symmetrized
/// and ridged with 1e-8 I so it is always invertible. Requires at least
/// 10 p samples.
Eigen::MatrixXd estimate_sigma(const Eigen::MatrixXd& residual_history);

/// Load an observer gain from the CSV format with a "n p" header line.
Eigen::MatrixXd load_gain(const std::filesystem::path& path, int n, int p);
void save_gain(const std::filesystem::path& path, const Eigen::MatrixXd& gain);

struct GainSynthesisOptions {
    /// Observer poles are placed at this multiple of the plant's slowest
    /// nonzero eigenvalue (the rigid-rotation zero mode is excluded).
    double pole_multiple = 5.0;
    double zero_mode_tol = 1e-6;
    /// Strength of the algebraic-row injection relative to the manifold
    /// tangent of the dynamic correction. Large values destabilize the
    /// joint error dynamics; keep well below 1.
    double algebraic_coupling = 0.05;
};

/// Heuristic output-injection gain: linearize at the operating point, reduce
/// to the dynamic subsystem by eliminating algebraic variables through the
/// algebraic Jacobian, place the reduced observer poles, and lift back to the
/// full state with zero rows on the algebraic part.
Eigen::MatrixXd synthesize_gain(const DescriptorSystem& sys,
                                const GainSynthesisOptions& opts = {});

struct GainValidation {
    bool passed = false;
    double initial_error = 0.0;
    double final_error = 0.0;
};

/// Noise-free 10 s run from a perturbed initial estimate; the gain passes if
/// the estimation error contracts by `required_contraction`.
GainValidation validate_gain(const DescriptorSystem& sys, const Eigen::MatrixXd& gain,
                             double dt = 0.01, double horizon = 10.0,
                             double perturbation = 1e-2,
                             double required_contraction = 0.25);

} // namespace gridsec
