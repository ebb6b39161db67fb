#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace gridsec {

class DetectorError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Threshold for the quadratic residual-energy detector at `n_y` independent
/// measurements and a mean time of `m` steps between false alarms:
/// the (1 - 1/m) quantile of a chi-squared law with n_y degrees of freedom,
/// found by bracketing bisection on the regularized lower incomplete gamma
/// CDF to |CDF(alpha/2) - (1 - 1/m)| < 1e-10.
double chi2_threshold(int n_y, double m);

/// Mahalanobis energy z = r^T Sigma^{-1} r thresholded at alpha. Alarms are
/// strict: z exactly at alpha does not alarm.
class Chi2Detector {
public:
    Chi2Detector(double alpha, const Eigen::MatrixXd& sigma_inv);

    double alpha() const { return alpha_; }
    const Eigen::MatrixXd& sigma_inv() const { return sigma_inv_; }

    /// Statistic and alarm flag for one residual (the detector is stateless).
    std::pair<double, bool> step(const Eigen::VectorXd& r) const;

private:
    double alpha_;
    Eigen::MatrixXd sigma_inv_;
};

enum class CusumMode { Aggregated, Vector };

struct CusumAlarm {
    std::int64_t step = 0;
    int component = -1; // -1 for the aggregated statistic
};

/// Cumulative-sum detector over residual distance measures. In aggregated
/// mode the distance is z = r^T Sigma^{-1} r and one scalar statistic is
/// kept; in vector mode z_i = |r_i| with per-component bias and threshold.
/// Update: c <- max(0, c + z - b); when c strictly exceeds tau the alarm is
/// logged for the current step and the statistic resets to zero. (Equivalent
/// single-pass form of the two-branch recursion that reports the previous
/// index on reset.)
class CusumDetector {
public:
    /// Aggregated mode.
    CusumDetector(double bias, double tau, const Eigen::MatrixXd& sigma_inv);
    /// Vector mode.
    CusumDetector(const Eigen::VectorXd& bias, const Eigen::VectorXd& tau);

    CusumMode mode() const { return mode_; }
    double bias_scalar() const { return bias_[0]; }
    double tau_scalar() const { return tau_[0]; }
    const Eigen::VectorXd& bias() const { return bias_; }
    const Eigen::VectorXd& tau() const { return tau_; }
    const Eigen::MatrixXd& sigma_inv() const { return sigma_inv_; }

    /// Current statistic (scalar in aggregated mode, p-vector otherwise).
    const Eigen::VectorXd& statistic() const { return c_; }
    void reset(const Eigen::VectorXd& c0 = {});

    /// Advance one step; returns the distance measure that was accumulated.
    /// Alarms for this step are appended to `alarm_log()`.
    Eigen::VectorXd step(const Eigen::VectorXd& r);

    const std::vector<CusumAlarm>& alarm_log() const { return alarms_; }
    std::int64_t steps_seen() const { return k_; }

private:
    CusumMode mode_;
    Eigen::VectorXd bias_, tau_, c_;
    Eigen::MatrixXd sigma_inv_;
    std::vector<CusumAlarm> alarms_;
    std::int64_t k_ = 0;
};

struct CusumCalibration {
    Eigen::VectorXd bias;
    Eigen::VectorXd tau;
    std::int64_t history_length = 0;
    double achieved_interval = 0.0; // empirical false-alarm spacing on held-out data
};

/// Pick (b, tau) from an attack-free residual history: the bias is the
/// empirical mean of the distance measure plus one standard deviation
/// (computed on the first half), and tau is the smallest grid value whose
/// false-alarm interval on the held-out second half is at least `m` steps.
/// `sigma_inv` is required for the aggregated distance measure.
CusumCalibration calibrate_cusum(const Eigen::MatrixXd& residual_history, double m,
                                 CusumMode mode, const Eigen::MatrixXd& sigma_inv = {});

} // namespace gridsec
