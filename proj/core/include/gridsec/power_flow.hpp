#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "gridsec/case.hpp"
#include "gridsec/power.hpp"

namespace gridsec {

class PowerFlowError : public std::runtime_error {
public:
    PowerFlowError(const std::string& msg, double mismatch, int iterations)
        : std::runtime_error(msg), final_mismatch(mismatch), iterations(iterations) {}
    double final_mismatch;
    int iterations;
};

struct PowerFlowOptions {
    double tolerance = 1e-8; // max |mismatch| in per-unit
    int max_iterations = 50;
    bool flat_start = true;
    ReactiveForm reactive_form = ReactiveForm::Standard;
};

struct PowerFlowSolution {
    Eigen::VectorXd v;       // per bus, per-unit
    Eigen::VectorXd theta;   // per bus, radians; slack pinned to 0
    Eigen::VectorXd p_gen;   // per generator, per-unit
    Eigen::VectorXd q_gen;
    double max_mismatch = 0.0;
    int iterations = 0;
};

/// Newton-Raphson AC power flow on the bus balance equations. Slack bus
/// carries the angle reference (theta = 0) and absorbs the residual power.
PowerFlowSolution solve_power_flow(const GridCase& grid, const AdmittanceMatrix& ybus,
                                   const PowerFlowOptions& opts = {});

} // namespace gridsec
