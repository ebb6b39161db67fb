#include "gridsec/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

namespace gridsec {

double chi2_threshold(int n_y, double m) {
    if (n_y < 1) throw DetectorError("chi2_threshold requires n_y >= 1");
    if (m < 2.0) throw DetectorError("chi2_threshold requires m >= 2");
    const double a = 0.5 * n_y;
    const double target = 1.0 - 1.0 / m;
    auto cdf = [a](double alpha) { return boost::math::gamma_p(a, 0.5 * alpha); };

    double lo = 0.0;
    double hi = n_y + 10.0 * std::sqrt(2.0 * n_y) + 10.0;
    while (cdf(hi) < target) hi *= 2.0;

    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Chi2Detector::Chi2Detector(double alpha, const Eigen::MatrixXd& sigma_inv)
    : alpha_(alpha), sigma_inv_(sigma_inv) {
    if (alpha <= 0.0) throw DetectorError("chi2 threshold must be positive");
    if (sigma_inv.rows() != sigma_inv.cols())
        throw DetectorError("precision matrix must be square");
    if (!sigma_inv.isApprox(sigma_inv.transpose(), 1e-9))
        throw DetectorError("precision matrix must be symmetric");
}

std::pair<double, bool> Chi2Detector::step(const Eigen::VectorXd& r) const {
    if (r.size() != sigma_inv_.rows()) throw DetectorError("residual dimension mismatch");
    const double z = r.dot(sigma_inv_ * r);
    return {z, z > alpha_};
}

CusumDetector::CusumDetector(double bias, double tau, const Eigen::MatrixXd& sigma_inv)
    : mode_(CusumMode::Aggregated), sigma_inv_(sigma_inv) {
    if (bias <= 0.0 || tau <= 0.0) throw DetectorError("CUSUM bias and tau must be positive");
    if (sigma_inv.rows() != sigma_inv.cols())
        throw DetectorError("precision matrix must be square");
    bias_ = Eigen::VectorXd::Constant(1, bias);
    tau_ = Eigen::VectorXd::Constant(1, tau);
    c_ = Eigen::VectorXd::Zero(1);
}

CusumDetector::CusumDetector(const Eigen::VectorXd& bias, const Eigen::VectorXd& tau)
    : mode_(CusumMode::Vector), bias_(bias), tau_(tau) {
    if (bias.size() != tau.size()) throw DetectorError("CUSUM parameter shape mismatch");
    if ((bias.array() <= 0.0).any() || (tau.array() <= 0.0).any())
        throw DetectorError("CUSUM bias and tau must be positive");
    c_ = Eigen::VectorXd::Zero(bias.size());
}

void CusumDetector::reset(const Eigen::VectorXd& c0) {
    if (c0.size() == 0) {
        c_.setZero();
    } else {
        if (c0.size() != c_.size()) throw DetectorError("CUSUM reset shape mismatch");
        if ((c0.array() < 0.0).any()) throw DetectorError("CUSUM statistic must be nonnegative");
        c_ = c0;
    }
    k_ = 0;
    alarms_.clear();
}

Eigen::VectorXd CusumDetector::step(const Eigen::VectorXd& r) {
    Eigen::VectorXd z;
    if (mode_ == CusumMode::Aggregated) {
        if (r.size() != sigma_inv_.rows()) throw DetectorError("residual dimension mismatch");
        z = Eigen::VectorXd::Constant(1, r.dot(sigma_inv_ * r));
    } else {
        if (r.size() != bias_.size()) throw DetectorError("residual dimension mismatch");
        z = r.cwiseAbs();
    }
    for (Eigen::Index i = 0; i < c_.size(); ++i) {
        c_[i] = std::max(0.0, c_[i] + z[i] - bias_[i]);
        if (c_[i] > tau_[i]) {
            alarms_.push_back({k_, mode_ == CusumMode::Aggregated ? -1 : static_cast<int>(i)});
            c_[i] = 0.0;
        }
    }
    ++k_;
    return z;
}

namespace {

// Alarm count of the reset-on-alarm recursion over a distance series.
std::int64_t count_alarms(const Eigen::VectorXd& z, double b, double tau) {
    double c = 0.0;
    std::int64_t alarms = 0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        c = std::max(0.0, c + z[k] - b);
        if (c > tau) {
            ++alarms;
            c = 0.0;
        }
    }
    return alarms;
}

std::pair<double, double> pick_bias_tau(const Eigen::VectorXd& z_train,
                                        const Eigen::VectorXd& z_test, double m,
                                        double* achieved) {
    if (static_cast<double>(z_test.size()) < m)
        throw DetectorError("insufficient residual history: the held-out window (" +
                            std::to_string(z_test.size()) +
                            " steps) cannot witness a false-alarm interval of " +
                            std::to_string(m));
    const double mean = z_train.mean();
    const double var = (z_train.array() - mean).square().sum() /
                       std::max<Eigen::Index>(1, z_train.size() - 1);
    const double b = mean + std::sqrt(var);

    // Scan tau upward until the held-out false-alarm interval reaches m.
    double peak = 0.0;
    {
        double c = 0.0;
        for (Eigen::Index k = 0; k < z_test.size(); ++k) {
            c = std::max(0.0, c + z_test[k] - b);
            peak = std::max(peak, c);
        }
    }
    const double tau_hi = std::max(peak * 2.0, b * 1e-3 + 1e-12);
    const int grid = 400;
    for (int i = 1; i <= grid; ++i) {
        const double tau = tau_hi * static_cast<double>(i) / grid;
        const std::int64_t alarms = count_alarms(z_test, b, tau);
        const double interval =
            alarms == 0 ? std::numeric_limits<double>::infinity()
                        : static_cast<double>(z_test.size()) / static_cast<double>(alarms);
        if (interval >= m) {
            if (achieved) *achieved = interval;
            return {b, tau};
        }
    }
    throw DetectorError("CUSUM calibration could not reach the requested false-alarm interval");
}

} // namespace

CusumCalibration calibrate_cusum(const Eigen::MatrixXd& residual_history, double m,
                                 CusumMode mode, const Eigen::MatrixXd& sigma_inv) {
    const Eigen::Index k = residual_history.rows();
    const Eigen::Index p = residual_history.cols();
    if (k < 20) throw DetectorError("insufficient residual history for calibration");

    const Eigen::Index split = k / 2;
    CusumCalibration cal;
    cal.history_length = k;

    if (mode == CusumMode::Aggregated) {
        if (sigma_inv.rows() != p || sigma_inv.cols() != p)
            throw DetectorError("aggregated calibration needs a p x p precision matrix");
        Eigen::VectorXd z(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::VectorXd r = residual_history.row(i).transpose();
            z[i] = r.dot(sigma_inv * r);
        }
        double achieved = 0.0;
        auto [b, tau] = pick_bias_tau(z.head(split), z.tail(k - split), m, &achieved);
        cal.bias = Eigen::VectorXd::Constant(1, b);
        cal.tau = Eigen::VectorXd::Constant(1, tau);
        cal.achieved_interval = achieved;
        return cal;
    }

    cal.bias.resize(p);
    cal.tau.resize(p);
    double worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd z = residual_history.col(j).cwiseAbs();
        double achieved = 0.0;
        auto [b, tau] = pick_bias_tau(z.head(split), z.tail(k - split), m, &achieved);
        cal.bias[j] = b;
        cal.tau[j] = tau;
        worst = std::min(worst, achieved);
    }
    cal.achieved_interval = worst;
    return cal;
}

} // namespace gridsec
