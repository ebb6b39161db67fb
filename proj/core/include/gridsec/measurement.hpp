#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridsec/descriptor.hpp"

namespace gridsec {

/// What a row of the measurement matrix represents.
enum class MeasurementKind { VoltageMag, VoltageAngle, CurrentMag, CurrentAngle };

struct MeasurementRow {
    MeasurementKind kind;
    int bus = -1;     // bus id for voltage rows, from-end bus id for current rows
    int other = -1;   // to-end bus id for current rows
    std::string name;
};

struct MeasurementOptions {
    /// Include linearized current-phasor rows for the case's pmu_lines list.
    bool include_line_currents = true;
};

/// PMU measurement map y = C x. Voltage rows select (v, theta) at each PMU
/// bus exactly. Current rows are the line-current magnitude/angle linearized
/// about the operating point and kept fixed for the scenario, so C stays a
/// constant matrix.
struct MeasurementModel {
    Eigen::MatrixXd c;
    std::vector<MeasurementRow> rows;

    int n_rows() const { return static_cast<int>(c.rows()); }

    /// Indices of rows whose support touches any of the given bus ids
    /// (voltage rows at the bus, current rows with an endpoint there).
    std::vector<int> rows_touching_buses(const std::vector<int>& bus_ids) const;
};

/// Build C from the case's PMU placement at the system operating point.
/// Throws CaseError for a PMU on an unknown bus or an empty placement.
MeasurementModel build_measurement_matrix(const DescriptorSystem& sys,
                                          const MeasurementOptions& opts = {});

} // namespace gridsec
