#include "gridsec/noise.hpp"

#include <cstring>

namespace gridsec {

NoiseModel::NoiseModel(const Eigen::MatrixXd& process_cov, const Eigen::MatrixXd& measurement_cov,
                       std::uint64_t seed)
    : process_cov_(process_cov), measurement_cov_(measurement_cov), seed_(seed) {
    if (process_cov.rows() != process_cov.cols() ||
        measurement_cov.rows() != measurement_cov.cols())
        throw std::invalid_argument("noise covariances must be square");
    process_fac_ = factor(process_cov_, "process");
    measurement_fac_ = factor(measurement_cov_, "measurement");
}

NoiseModel NoiseModel::diagonal(const Eigen::VectorXd& process_var,
                                const Eigen::VectorXd& measurement_var, std::uint64_t seed) {
    return NoiseModel(process_var.asDiagonal().toDenseMatrix(),
                      measurement_var.asDiagonal().toDenseMatrix(), seed);
}

Eigen::MatrixXd NoiseModel::factor(const Eigen::MatrixXd& cov, const char* what) {
    if (cov.size() == 0) return cov;
    if (!cov.isApprox(cov.transpose(), 1e-12))
        throw std::invalid_argument(std::string(what) + " covariance must be symmetric");
    if (cov.isZero(0.0)) return Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
    Eigen::LLT<Eigen::MatrixXd> llt(cov +
                                    1e-300 * Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
    if (llt.info() != Eigen::Success) {
        // Semidefinite fallback: eigendecomposition with clipped spectrum.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if ((es.eigenvalues().array() < -1e-10).any())
            throw std::invalid_argument(std::string(what) +
                                        " covariance must be positive semidefinite");
        return es.eigenvectors() *
               es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal().toDenseMatrix();
    }
    return llt.matrixL();
}

Eigen::VectorXd NoiseModel::sample_process(std::uint64_t k) const {
    if (process_fac_.size() == 0) return Eigen::VectorXd();
    return process_fac_ * gaussian_vector_at(seed_, 0x9a0cE55u, k, process_fac_.rows());
}

Eigen::VectorXd NoiseModel::sample_measurement(std::uint64_t k) const {
    if (measurement_fac_.size() == 0) return Eigen::VectorXd();
    return measurement_fac_ * gaussian_vector_at(seed_, 0x3eA5u, k, measurement_fac_.rows());
}

} // namespace gridsec
