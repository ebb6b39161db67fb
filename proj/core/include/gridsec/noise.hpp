#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>

#include <Eigen/Dense>

#include "gridsec/rng.hpp"

namespace gridsec {

/// Stochastic load/renewable injections q(t) = q_bar + dq(t) with dq drawn
/// i.i.d. Gaussian per step, componentwise std sigma. Sampling is keyed on
/// the time value, so repeated queries at the same instant agree.
struct DisturbanceModel {
    Eigen::VectorXd q_bar;
    Eigen::VectorXd sigma;
    std::uint64_t seed = 0;

    DisturbanceModel() = default;
    DisturbanceModel(Eigen::VectorXd q_bar_, Eigen::VectorXd sigma_, std::uint64_t seed_)
        : q_bar(std::move(q_bar_)), sigma(std::move(sigma_)), seed(seed_) {
        if (sigma.size() != q_bar.size())
            throw std::invalid_argument("disturbance sigma dimension mismatch");
        if ((sigma.array() < 0.0).any())
            throw std::invalid_argument("disturbance sigma must be nonnegative");
    }

    Eigen::VectorXd sample(double t) const {
        if (sigma.size() == 0) return q_bar;
        std::uint64_t key;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        std::memcpy(&key, &t, sizeof(key));
        Eigen::VectorXd g = gaussian_vector_at(seed, 0x71731u, key, q_bar.size());
        return q_bar + sigma.cwiseProduct(g);
    }
};

/// Process/measurement noise with diagonal-or-full covariance. Covariances
/// are factored once (Cholesky with a zero-diagonal guard) for sampling.
class NoiseModel {
public:
    NoiseModel() = default;
    NoiseModel(const Eigen::MatrixXd& process_cov, const Eigen::MatrixXd& measurement_cov,
               std::uint64_t seed);

    static NoiseModel diagonal(const Eigen::VectorXd& process_var,
                               const Eigen::VectorXd& measurement_var, std::uint64_t seed);

    const Eigen::MatrixXd& process_cov() const { return process_cov_; }
    const Eigen::MatrixXd& measurement_cov() const { return measurement_cov_; }

    /// Process-noise sample for step k (zero-order held over the step).
    Eigen::VectorXd sample_process(std::uint64_t k) const;
    /// Measurement-noise sample for step k.
    Eigen::VectorXd sample_measurement(std::uint64_t k) const;

    std::uint64_t seed() const { return seed_; }

private:
    static Eigen::MatrixXd factor(const Eigen::MatrixXd& cov, const char* what);

    Eigen::MatrixXd process_cov_, measurement_cov_;
    Eigen::MatrixXd process_fac_, measurement_fac_; // lower-triangular factors
    std::uint64_t seed_ = 0;
};

} // namespace gridsec
