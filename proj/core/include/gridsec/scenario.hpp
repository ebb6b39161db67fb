#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridsec/attack.hpp"
#include "gridsec/case.hpp"
#include "gridsec/detectors.hpp"
#include "gridsec/measurement.hpp"
#include "gridsec/observer.hpp"
#include "gridsec/sim.hpp"
#include "gridsec/zone.hpp"

namespace gridsec {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RenewableSite {
    int bus = 0;
    double p_capacity = 0.0; // per-unit, scales the fluctuation size
    double q_capacity = 0.0;
    double p_nominal = 0.0;  // per-unit steady injection, unknown to the operator
    double q_nominal = 0.0;
};

struct AttackConfig {
    AttackStrategy strategy = AttackStrategy::ScuaCusumAgg;
    double start_s = 15.0;
    AttackPlacement placement = AttackPlacement::PreSe;
    EstimatorMethod estimator = EstimatorMethod::ObserverStep;
    std::vector<int> gamma;        // 0-based measurement indices
    std::vector<int> target_buses; // used when gamma is empty
    int n_targets = 0;             // used when both above are empty
    bool masked = false;
    bool sign_plus = true;
    double beta = 0.01;
    int n_max = 100;
    double zeta = 0.22;
    std::vector<int> zone_targets; // bus ids; defaults to target_buses
    ZoneOptions zone;
    bool restrict_to_zone = false;
    int linearization_refresh_steps = 50;
    double linearization_refresh_dist = 0.05;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::filesystem::path case_path;
    double dt = 0.01;
    double horizon_s = 30.0;
    std::uint64_t seed = 0;
    bool seed_given = false;

    ReactiveForm reactive_form = ReactiveForm::Standard;

    double process_std = 0.0;     // dynamic-row process noise
    double measurement_std = 0.0; // per-measurement noise

    std::vector<RenewableSite> renewables;
    double renewable_sigma_coeff = 0.0;
    double load_sigma_coeff = 0.0;

    std::optional<std::filesystem::path> gain_file;
    double pole_multiple = 5.0;
    double algebraic_coupling = 0.05;
    bool validate_gain_flag = false;

    DetectorType detector = DetectorType::CusumAgg;
    double false_alarm_m = 1000.0;
    int calibration_steps = 3000;
    int calibration_settle_steps = 800; // dropped before residuals are recorded
    std::optional<double> alpha_override;
    std::optional<double> tau_override;
    std::optional<double> b_override;

    std::optional<AttackConfig> attack;

    std::filesystem::path out_dir;
    std::string raw_json; // original config text, hashed into the manifest
};

ScenarioConfig load_scenario_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir = {});

/// Detector parameters actually used by a run (after calibration/overrides).
struct DetectorSettings {
    DetectorType type = DetectorType::CusumAgg;
    double alpha = 0.0;
    double tau = 0.0;
    double b = 0.0;
    Eigen::VectorXd tau_vec, b_vec;
    Eigen::MatrixXd sigma, sigma_inv, sigma_sqrt;
    double achieved_interval = 0.0;
};

struct AttackStepRecord {
    std::int64_t k = 0;
    bool active = false;
    bool feasible = true;
    int iterations = 0;
    double norm_a = 0.0;
    double g_abs_sum = 0.0;
    int violations = 0;
    double detector_stat = 0.0;
};

struct ScenarioResult {
    double rmse = 0.0;
    Eigen::VectorXd mae_series;
    Eigen::MatrixXd abs_error;      // (K+1) x n
    Eigen::VectorXd g_abs_series;   // |sum g| on the estimate, per step
    std::vector<int> violation_series;
    Eigen::VectorXd detector_z;     // distance measure per step (max over components)
    Eigen::VectorXd detector_c;     // CUSUM statistic per step (0 for chi2)
    std::vector<std::int64_t> alarm_steps;
    std::vector<AttackStepRecord> attack_steps;
    Eigen::MatrixXd injected;       // (K+1) x p, y* - y
    Trajectory truth;
    EstimateTrace estimate;
    DetectorSettings detector;
    double runtime_seconds = 0.0;
    int infeasible_attack_steps = 0;
    int active_attack_steps = 0;
    std::uint64_t case_hash = 0;
};

/// Reusable per-case state: parsed case, solved flow, assembled system,
/// measurement model, observer gain. Independent of seeds.
struct PreparedCase {
    GridCase grid;
    AdmittanceMatrix ybus;
    DescriptorSystem sys;
    MeasurementModel measurement;
    Eigen::MatrixXd gain;
    std::string case_text;
};

PreparedCase prepare_case(const ScenarioConfig& cfg);

/// Full pipeline: calibrate the detector on an attack-free run, then simulate
/// truth + (optional) attack injection + estimation + detection, producing
/// all series needed for export and metrics.
ScenarioResult run_scenario(const ScenarioConfig& cfg);
ScenarioResult run_scenario(const ScenarioConfig& cfg, const PreparedCase& prep);

struct MetricSummary {
    double rmse = 0.0;
    Eigen::VectorXd mae_series;
    Eigen::MatrixXd abs_error;
};

/// RMSE over all states and steps plus the per-step mean absolute error.
MetricSummary compute_metrics(const Eigen::MatrixXd& truth_states,
                              const Eigen::MatrixXd& estimate_states);

enum class SweepParameter { Beta, Zeta, NTargets };

struct SweepRow {
    double value = 0.0;
    double rmse = 0.0;
    double runtime_seconds = 0.0;
    long violations = 0;
    long alarms = 0;
};

/// One scenario per value with shared seeds; the base config must carry an
/// attack section for Beta/Zeta/NTargets to act on.
std::vector<SweepRow> sweep(SweepParameter parameter, const std::vector<double>& values,
                            const ScenarioConfig& base_cfg);

// ---- export ---------------------------------------------------------------

/// Write the result series as CSV plus a manifest JSON carrying dt, seeds and
/// case/config hashes. Deterministic: identical configs produce byte-identical
/// CSV files.
void export_result(const ScenarioConfig& cfg, const ScenarioResult& result,
                   const std::filesystem::path& dir);

/// Calibration report (chosen thresholds and achieved false-alarm interval).
void export_calibration(const DetectorSettings& settings, std::int64_t history_length,
                        const std::filesystem::path& path);

std::string detector_type_name(DetectorType t);
std::string strategy_name(AttackStrategy s);

} // namespace gridsec
