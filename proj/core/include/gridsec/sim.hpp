#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridsec/descriptor.hpp"
#include "gridsec/noise.hpp"

namespace gridsec {

class SimError : public std::runtime_error {
public:
    SimError(const std::string& msg, double t) : std::runtime_error(msg), time(t) {}
    double time;
};

/// Time series produced by a simulation run.
struct Trajectory {
    double dt = 0.0;
    double horizon = 0.0;
    Eigen::MatrixXd states;        // (K+1) x n, row k is x at t = k dt
    Eigen::MatrixXd measurements;  // (K+1) x p
    Eigen::MatrixXd inputs;        // (K+1) x n_u

    int n_samples() const { return static_cast<int>(states.rows()); }
    double time_at(int k) const { return k * dt; }
};

struct StepOptions {
    double newton_tol = 1e-10;      // infinity norm on the combined residual
    int max_newton_iter = 25;
    double consistency_tol = 1e-8;  // accepted algebraic residual after a step
};

/// One-step integrator for the descriptor model: implicit trapezoidal rule on
/// the differential rows solved simultaneously with the algebraic rows
/// (index-1 treatment). Inputs, disturbances, and noise are held constant
/// over the step.
class TrapezoidalStepper {
public:
    TrapezoidalStepper(const DescriptorSystem& sys, StepOptions opts = {});

    /// Advance from x over one step of length dt. `w_process` is an n-vector
    /// additive noise (empty for none).
    Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& q, double dt,
                         const Eigen::VectorXd& w_process = {}) const;

private:
    const DescriptorSystem& sys_;
    StepOptions opts_;
};

/// y = C x plus measurement noise for step k (deterministic per seed/step).
Eigen::VectorXd measure(const DescriptorSystem& sys, const Eigen::VectorXd& x,
                        const NoiseModel& noise, std::uint64_t k);

struct SimulateOptions {
    StepOptions step;
    bool record_measurements = true;
};

/// Integrate from x0 over `horizon` seconds with constant controls, sampling
/// disturbances and noise once per step. Aborts with SimError (carrying the
/// failure time) if a step cannot be completed.
Trajectory simulate(const DescriptorSystem& sys, const Eigen::VectorXd& x0,
                    const Eigen::VectorXd& u, const DisturbanceModel& disturbance,
                    const NoiseModel& noise, double dt, double horizon,
                    const SimulateOptions& opts = {});

} // namespace gridsec
