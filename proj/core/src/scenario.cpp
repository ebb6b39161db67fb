#include "gridsec/scenario.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace gridsec {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCalibTag = 0xCA11B;
constexpr std::uint64_t kMainTag = 0x3A17;

AttackStrategy parse_strategy(const std::string& s) {
    if (s == "scua_cusum_agg") return AttackStrategy::ScuaCusumAgg;
    if (s == "scua_cusum_vec") return AttackStrategy::ScuaCusumVec;
    if (s == "scua_chi2") return AttackStrategy::ScuaChi2;
    if (s == "scaa_opt") return AttackStrategy::ScaaOpt;
    if (s == "icaa") return AttackStrategy::Icaa;
    throw ConfigError("unknown attack strategy '" + s + "'");
}

DetectorType parse_detector(const std::string& s) {
    if (s == "chi2") return DetectorType::Chi2;
    if (s == "cusum_agg") return DetectorType::CusumAgg;
    if (s == "cusum_vec") return DetectorType::CusumVec;
    throw ConfigError("unknown detector type '" + s + "'");
}

} // namespace

std::string detector_type_name(DetectorType t) {
    switch (t) {
    case DetectorType::Chi2: return "chi2";
    case DetectorType::CusumAgg: return "cusum_agg";
    case DetectorType::CusumVec: return "cusum_vec";
    }
    return "?";
}

std::string strategy_name(AttackStrategy s) {
    switch (s) {
    case AttackStrategy::ScuaCusumAgg: return "scua_cusum_agg";
    case AttackStrategy::ScuaCusumVec: return "scua_cusum_vec";
    case AttackStrategy::ScuaChi2: return "scua_chi2";
    case AttackStrategy::ScaaOpt: return "scaa_opt";
    case AttackStrategy::Icaa: return "icaa";
    }
    return "?";
}

ScenarioConfig parse_scenario_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ScenarioConfig cfg;
    cfg.raw_json = json_text;
    try {
        cfg.name = j.value("name", std::string("scenario"));
        if (!j.contains("case")) throw ConfigError("config missing 'case' path");
        cfg.case_path = base_dir / j.at("case").get<std::string>();
        cfg.dt = j.value("dt", 0.01);
        cfg.horizon_s = j.value("horizon_s", 30.0);
        if (!j.contains("seed")) throw ConfigError("config missing mandatory 'seed'");
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.seed_given = true;

        if (j.contains("model")) {
            const std::string form = j["model"].value("reactive_form", "standard");
            if (form == "standard") cfg.reactive_form = ReactiveForm::Standard;
            else if (form == "g_cos_minus_b_sin") cfg.reactive_form = ReactiveForm::GCosMinusBSin;
            else throw ConfigError("unknown reactive_form '" + form + "'");
        }
        if (j.contains("noise")) {
            cfg.process_std = j["noise"].value("process_std", 0.0);
            cfg.measurement_std = j["noise"].value("measurement_std", 0.0);
        }
        if (j.contains("disturbance")) {
            const auto& d = j["disturbance"];
            cfg.renewable_sigma_coeff = d.value("sigma_coeff", 0.0);
            cfg.load_sigma_coeff = d.value("load_sigma_coeff", 0.0);
            if (d.contains("renewables")) {
                for (const auto& r : d["renewables"]) {
                    RenewableSite site;
                    site.bus = r.at("bus").get<int>();
                    site.p_capacity = r.value("p_capacity_mw", 0.0);
                    site.q_capacity = r.value("q_capacity_mvar", 0.0);
                    site.p_nominal = r.value("p_nominal_mw", 0.0);
                    site.q_nominal = r.value("q_nominal_mvar", 0.0);
                    cfg.renewables.push_back(site);
                }
            }
        }
        if (j.contains("observer")) {
            const auto& o = j["observer"];
            if (o.contains("gain_file") && !o["gain_file"].is_null())
                cfg.gain_file = base_dir / o["gain_file"].get<std::string>();
            cfg.pole_multiple = o.value("pole_multiple", 5.0);
            cfg.algebraic_coupling = o.value("algebraic_coupling", 0.05);
            cfg.validate_gain_flag = o.value("validate", false);
        }
        if (j.contains("detector")) {
            const auto& d = j["detector"];
            cfg.detector = parse_detector(d.value("type", "cusum_agg"));
            cfg.false_alarm_m = d.value("mean_time_between_false_alarms", 1000.0);
            cfg.calibration_steps = d.value("calibration_steps", 3000);
            cfg.calibration_settle_steps = d.value("calibration_settle_steps", 800);
            if (d.contains("alpha") && !d["alpha"].is_null())
                cfg.alpha_override = d["alpha"].get<double>();
            if (d.contains("tau") && !d["tau"].is_null())
                cfg.tau_override = d["tau"].get<double>();
            if (d.contains("b") && !d["b"].is_null()) cfg.b_override = d["b"].get<double>();
        }
        if (j.contains("attack") && !j["attack"].is_null()) {
            const auto& a = j["attack"];
            AttackConfig atk;
            atk.strategy = parse_strategy(a.value("strategy", "scua_cusum_agg"));
            atk.start_s = a.value("start_s", 15.0);
            const std::string placement = a.value("placement", "pre_se");
            if (placement == "pre_se") atk.placement = AttackPlacement::PreSe;
            else if (placement == "post_se") atk.placement = AttackPlacement::PostSe;
            else throw ConfigError("unknown placement '" + placement + "'");
            const std::string est = a.value("estimator", "observer_step");
            if (est == "observer_step") atk.estimator = EstimatorMethod::ObserverStep;
            else if (est == "pseudo_inverse") atk.estimator = EstimatorMethod::PseudoInverse;
            else throw ConfigError("unknown estimator '" + est + "'");
            if (a.contains("gamma"))
                for (int idx : a["gamma"].get<std::vector<int>>()) {
                    if (idx < 1) throw ConfigError("gamma indices are 1-based");
                    atk.gamma.push_back(idx - 1);
                }
            if (a.contains("target_buses"))
                atk.target_buses = a["target_buses"].get<std::vector<int>>();
            atk.n_targets = a.value("n_targets", 0);
            atk.masked = a.value("masked", false);
            atk.sign_plus = a.value("sign", std::string("plus")) != "minus";
            if (a.contains("icaa_params")) {
                const auto& ip = a["icaa_params"];
                atk.beta = ip.value("beta", 0.01);
                atk.n_max = ip.value("n_max", 100);
                atk.zeta = ip.value("zeta", 0.22);
            }
            atk.beta = a.value("beta", atk.beta);
            atk.n_max = a.value("n_max", atk.n_max);
            atk.zeta = a.value("zeta", atk.zeta);
            if (a.contains("zone")) {
                const auto& z = a["zone"];
                if (z.contains("targets"))
                    atk.zone_targets = z["targets"].get<std::vector<int>>();
                atk.zone.d_max = z.value("d_max", 3);
                atk.zone.epsilon = z.value("epsilon", 1e-6);
                atk.restrict_to_zone = z.value("restrict", false);
            }
            atk.linearization_refresh_steps = a.value("linearization_refresh_steps", 50);
            atk.linearization_refresh_dist = a.value("linearization_refresh_dist", 0.05);
            if (atk.start_s >= cfg.horizon_s)
                throw ConfigError("attack start time must precede the horizon");
            cfg.attack = atk;
        }
        if (j.contains("output")) cfg.out_dir = base_dir / j["output"].value("dir", "out");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    if (cfg.dt <= 0.0 || cfg.horizon_s <= 0.0) throw ConfigError("dt and horizon_s must be positive");
    return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario_config(ss.str(), path.parent_path());
}

PreparedCase prepare_case(const ScenarioConfig& cfg) {
    PreparedCase prep;
    {
        std::ifstream in(cfg.case_path);
        if (!in) throw ConfigError("cannot open case file " + cfg.case_path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        prep.case_text = ss.str();
    }
    prep.grid = parse_case(prep.case_text);
    prep.ybus = build_ybus(prep.grid);

    PowerFlowOptions pf_opts;
    pf_opts.reactive_form = cfg.reactive_form;
    const PowerFlowSolution pf = solve_power_flow(prep.grid, prep.ybus, pf_opts);

    ModelOptions model;
    model.reactive_form = cfg.reactive_form;
    prep.sys = assemble_descriptor(prep.grid, prep.ybus, pf, model);

    prep.measurement = build_measurement_matrix(prep.sys);
    prep.sys.set_measurement_matrix(prep.measurement.c);

    if (cfg.gain_file) {
        prep.gain = load_gain(*cfg.gain_file, prep.sys.n_total(), prep.sys.n_measurements());
    } else {
        GainSynthesisOptions gopts;
        gopts.pole_multiple = cfg.pole_multiple;
        gopts.algebraic_coupling = cfg.algebraic_coupling;
        prep.gain = synthesize_gain(prep.sys, gopts);
    }
    if (cfg.validate_gain_flag) {
        const GainValidation val = validate_gain(prep.sys, prep.gain, cfg.dt);
        if (!val.passed)
            throw ObserverError("observer gain failed the contraction check (error " +
                                std::to_string(val.initial_error) + " -> " +
                                std::to_string(val.final_error) + ")");
    }
    return prep;
}

namespace {

struct NoiseSetup {
    NoiseModel noise;
    DisturbanceModel disturbance;
};

NoiseSetup make_noise(const ScenarioConfig& cfg, const PreparedCase& prep, std::uint64_t tag) {
    const DescriptorSystem& sys = prep.sys;
    const int n = sys.n_total();
    const int nd = sys.n_dynamic();
    const int p = sys.n_measurements();
    const int nb = prep.grid.n_buses();

    // Process noise models unmodeled torque disturbances on the machine
    // speed equations.
    Eigen::VectorXd pvar = Eigen::VectorXd::Zero(n);
    const StateLayout& L = sys.layout();
    for (int g = 0; g < L.n_gen(); ++g)
        pvar[L.omega(g)] = cfg.process_std * cfg.process_std;
    Eigen::VectorXd mvar =
        Eigen::VectorXd::Constant(p, cfg.measurement_std * cfg.measurement_std);
    (void)nd;

    NoiseSetup setup{
        NoiseModel::diagonal(pvar, mvar, mix_seed(cfg.seed, tag, 1)),
        DisturbanceModel()};

    // The true injection carries the nominal renewable feed-in, which the
    // operator's model does not include.
    Eigen::VectorXd q_bar = sys.nominal_disturbance();
    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(4 * nb);
    for (const auto& site : cfg.renewables) {
        const int b = prep.grid.bus_index(site.bus);
        q_bar[b] += site.p_nominal / prep.grid.base_mva;
        q_bar[nb + b] += site.q_nominal / prep.grid.base_mva;
        sigma[b] = cfg.renewable_sigma_coeff * site.p_capacity / prep.grid.base_mva;
        sigma[nb + b] = cfg.renewable_sigma_coeff * site.q_capacity / prep.grid.base_mva;
    }
    if (cfg.load_sigma_coeff > 0.0) {
        for (int b = 0; b < nb; ++b) {
            sigma[2 * nb + b] = cfg.load_sigma_coeff * std::abs(prep.grid.buses[b].p_load);
            sigma[3 * nb + b] = cfg.load_sigma_coeff * std::abs(prep.grid.buses[b].q_load);
        }
    }
    setup.disturbance = DisturbanceModel(q_bar, sigma, mix_seed(cfg.seed, tag, 2));
    return setup;
}

struct CalibrationData {
    DetectorSettings settings;
    std::int64_t history_length = 0;
};

CalibrationData calibrate(const ScenarioConfig& cfg, const PreparedCase& prep,
                          const JointObserver& observer) {
    const DescriptorSystem& sys = prep.sys;
    const Eigen::MatrixXd& c = sys.measurement_matrix();
    const int p = sys.n_measurements();
    const NoiseSetup ns = make_noise(cfg, prep, kCalibTag);
    const Eigen::VectorXd& u0 = sys.nominal_input();
    const Eigen::VectorXd& q0 = sys.nominal_disturbance();

    const int settle = std::max(0, cfg.calibration_settle_steps);
    const int steps = cfg.calibration_steps;
    Eigen::MatrixXd residuals(steps, p);

    TrapezoidalStepper stepper(sys);
    // Truth settles at the equilibrium of the actual injections; the
    // operator's estimate starts from the modeled operating point and needs
    // the settle window before its residuals are representative.
    Eigen::VectorXd x =
        sys.solve_equilibrium(sys.operating_point(), u0, ns.disturbance.q_bar);
    Eigen::VectorXd xh = x; // estimator starts on the true branch and drifts
                            // to its own attractor over the settle window
    const bool post = cfg.attack && cfg.attack->placement == AttackPlacement::PostSe;
    for (int k = 1; k <= settle + steps; ++k) {
        const double t = k * cfg.dt;
        const Eigen::VectorXd q = ns.disturbance.sample(t);
        const Eigen::VectorXd w = ns.noise.sample_process(k);
        x = stepper.step(x, u0, q, cfg.dt, w);
        const Eigen::VectorXd y = measure(sys, x, ns.noise, k);
        const Eigen::VectorXd r_pre = y - c * xh;
        try {
            xh = observer.step(xh, y, u0, q0);
        } catch (const ObserverError& e) {
            throw ObserverError(std::string(e.what()) + " [calibration] at step " +
                                std::to_string(k));
        }
        if (k <= settle) continue;
        const Eigen::VectorXd r_used = post ? Eigen::VectorXd(y - c * xh) : r_pre;
        residuals.row(k - settle - 1) = r_used.transpose();
    }

    CalibrationData cal;
    cal.history_length = steps;
    DetectorSettings& det = cal.settings;
    det.type = cfg.detector;
    // Detectors normalize by the residual second moment: a persistent
    // model-mismatch offset then raises the baseline once instead of
    // saturating the Mahalanobis distance against tiny fluctuations.
    det.sigma = residuals.transpose() * residuals / static_cast<double>(steps - 1);
    det.sigma = 0.5 * (det.sigma + det.sigma.transpose());
    det.sigma += 1e-8 * Eigen::MatrixXd::Identity(p, p);
    det.sigma_inv = det.sigma.llt().solve(Eigen::MatrixXd::Identity(p, p));
    det.sigma_inv = 0.5 * (det.sigma_inv + det.sigma_inv.transpose());
    det.sigma_sqrt = det.sigma.llt().matrixL();

    switch (cfg.detector) {
    case DetectorType::Chi2:
        det.alpha = cfg.alpha_override ? *cfg.alpha_override
                                       : chi2_threshold(p, cfg.false_alarm_m);
        break;
    case DetectorType::CusumAgg: {
        if (cfg.tau_override && cfg.b_override) {
            det.tau = *cfg.tau_override;
            det.b = *cfg.b_override;
        } else {
            const CusumCalibration c2 = calibrate_cusum(residuals, cfg.false_alarm_m,
                                                        CusumMode::Aggregated, det.sigma_inv);
            det.tau = cfg.tau_override.value_or(c2.tau[0]);
            det.b = cfg.b_override.value_or(c2.bias[0]);
            det.achieved_interval = c2.achieved_interval;
        }
        break;
    }
    case DetectorType::CusumVec: {
        const CusumCalibration c2 =
            calibrate_cusum(residuals, cfg.false_alarm_m, CusumMode::Vector);
        det.tau_vec = c2.tau;
        det.b_vec = c2.bias;
        det.achieved_interval = c2.achieved_interval;
        break;
    }
    }
    return cal;
}

std::vector<int> resolve_targets(const ScenarioConfig& cfg, const PreparedCase& prep) {
    const AttackConfig& atk = *cfg.attack;
    if (!atk.gamma.empty()) {
        for (int i : atk.gamma)
            if (i < 0 || i >= prep.sys.n_measurements())
                throw ConfigError("gamma index out of range");
        return atk.gamma;
    }
    if (!atk.target_buses.empty()) {
        auto rows = prep.measurement.rows_touching_buses(atk.target_buses);
        if (rows.empty()) throw ConfigError("target buses select no measurements");
        return rows;
    }
    if (atk.n_targets > 0) {
        if (atk.n_targets > prep.sys.n_measurements())
            throw ConfigError("n_targets exceeds measurement count");
        std::vector<int> rows(atk.n_targets);
        for (int i = 0; i < atk.n_targets; ++i) rows[i] = i;
        return rows;
    }
    throw ConfigError("attack section selects no measurements");
}

} // namespace

MetricSummary compute_metrics(const Eigen::MatrixXd& truth_states,
                              const Eigen::MatrixXd& estimate_states) {
    if (truth_states.rows() != estimate_states.rows() ||
        truth_states.cols() != estimate_states.cols())
        throw ConfigError("metric series length mismatch");
    MetricSummary m;
    const Eigen::MatrixXd err = estimate_states - truth_states;
    m.abs_error = err.cwiseAbs();
    m.rmse = std::sqrt(err.array().square().mean());
    m.mae_series = m.abs_error.rowwise().mean();
    return m;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    const PreparedCase prep = prepare_case(cfg);
    return run_scenario(cfg, prep);
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const PreparedCase& prep) {
    using clock = std::chrono::steady_clock;
    const auto t_begin = clock::now();
    if (!cfg.seed_given) throw ConfigError("scenario seed is mandatory");

    const DescriptorSystem& sys = prep.sys;
    const Eigen::MatrixXd& c = sys.measurement_matrix();
    const int n = sys.n_total();
    const int p = sys.n_measurements();
    const Eigen::VectorXd& u0 = sys.nominal_input();
    const Eigen::VectorXd& q0 = sys.nominal_disturbance();

    ObserverConfig ocfg;
    ocfg.gain = prep.gain;
    ocfg.dt = cfg.dt;
    ocfg.initial_estimate = sys.operating_point();
    const JointObserver observer(sys, ocfg);

    // Attack-free calibration pass fixes the residual statistics and detector
    // parameters for this seed.
    const CalibrationData cal = calibrate(cfg, prep, observer);
    const DetectorSettings& det = cal.settings;

    const int steps = static_cast<int>(std::llround(cfg.horizon_s / cfg.dt));
    // The recorded window starts with a warm estimator: the settle prefix is
    // simulated with the same streams but not recorded.
    const int settle = std::max(0, cfg.calibration_settle_steps);
    const int k_star =
        cfg.attack ? static_cast<int>(std::ceil(cfg.attack->start_s / cfg.dt - 1e-9)) : steps + 1;

    ScenarioResult result;
    result.detector = det;
    result.case_hash = hash_case_text(prep.case_text);
    result.truth.dt = cfg.dt;
    result.truth.horizon = cfg.horizon_s;
    result.truth.states.resize(steps + 1, n);
    result.truth.measurements.resize(steps + 1, p);
    result.truth.inputs.resize(steps + 1, u0.size());
    result.estimate.estimates.resize(steps + 1, n);
    result.estimate.residuals.resize(steps + 1, p);
    result.estimate.error_norms.resize(steps + 1);
    result.g_abs_series.resize(steps + 1);
    result.violation_series.assign(steps + 1, 0);
    result.detector_z = Eigen::VectorXd::Zero(steps + 1);
    result.detector_c = Eigen::VectorXd::Zero(steps + 1);
    result.injected = Eigen::MatrixXd::Zero(steps + 1, p);

    const NoiseSetup ns = make_noise(cfg, prep, kMainTag);
    TrapezoidalStepper stepper(sys);
    const ConstraintEvaluator constraints(sys);

    // Detector instances (victim side).
    std::optional<Chi2Detector> chi2;
    std::optional<CusumDetector> cusum;
    switch (det.type) {
    case DetectorType::Chi2: chi2.emplace(det.alpha, det.sigma_inv); break;
    case DetectorType::CusumAgg: cusum.emplace(det.b, det.tau, det.sigma_inv); break;
    case DetectorType::CusumVec: cusum.emplace(det.b_vec, det.tau_vec); break;
    }

    // Attack bookkeeping.
    std::vector<int> targets;
    std::vector<int> g_rows, h_rows;
    double zeta_report = cfg.attack ? cfg.attack->zeta : 0.22;
    Eigen::MatrixXd c_pinv;
    Eigen::MatrixXd d_mat;
    if (cfg.attack) {
        targets = resolve_targets(cfg, prep);
        const AttackConfig& atk = *cfg.attack;
        if (atk.restrict_to_zone) {
            std::vector<int> zone_seed =
                atk.zone_targets.empty() ? atk.target_buses : atk.zone_targets;
            if (zone_seed.empty())
                throw ConfigError("zone restriction requires zone targets or target buses");
            const AttackZone zone = attack_zone(prep.ybus, prep.grid.zero_injection_flags(),
                                                prep.grid, sys.layout(), zone_seed, atk.zone);
            std::vector<int> covered;
            for (int id : zone.zone) covered.push_back(prep.grid.bus_index(id));
            for (int id : zone.boundary) covered.push_back(prep.grid.bus_index(id));
            g_rows = constraints.g_rows_for_buses(covered);
            h_rows = constraints.h_rows_for_buses(covered);
        }
        if (atk.estimator == EstimatorMethod::PseudoInverse) {
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(c);
            if (cod.rank() < c.rows())
                throw AttackError("measurement matrix rank-deficient for pseudo-inverse");
            c_pinv = cod.pseudoInverse();
        }
        if (atk.strategy == AttackStrategy::ScaaOpt) {
            d_mat.resize(n, static_cast<int>(targets.size()));
            for (std::size_t t = 0; t < targets.size(); ++t) {
                if (atk.estimator == EstimatorMethod::ObserverStep)
                    d_mat.col(t) = cfg.dt * prep.gain.col(targets[t]);
                else
                    d_mat.col(t) = c_pinv.col(targets[t]);
            }
        }
    }

    // Truth starts at the equilibrium of the actual injections; the estimate
    // starts from the modeled operating point and converges over the
    // unrecorded settle prefix.
    Eigen::VectorXd x =
        sys.solve_equilibrium(sys.operating_point(), u0, ns.disturbance.q_bar);
    Eigen::VectorXd xh = x;
    for (int k = 1; k <= settle; ++k) {
        const double t = (k - settle) * cfg.dt;
        const Eigen::VectorXd q = ns.disturbance.sample(t);
        const Eigen::VectorXd w = ns.noise.sample_process(k);
        x = stepper.step(x, u0, q, cfg.dt, w);
        const Eigen::VectorXd y = measure(sys, x, ns.noise, k);
        try {
            xh = observer.step(xh, y, u0, q0);
        } catch (const ObserverError& e) {
            throw ObserverError(std::string(e.what()) + " [settle] at step " +
                                std::to_string(k));
        }
    }
    Eigen::VectorXd y0 = measure(sys, x, ns.noise, settle);
    result.truth.states.row(0) = x.transpose();
    result.truth.measurements.row(0) = y0.transpose();
    result.truth.inputs.row(0) = u0.transpose();
    result.estimate.estimates.row(0) = xh.transpose();
    result.estimate.residuals.row(0) = (y0 - c * xh).transpose();
    result.estimate.error_norms[0] = (xh - x).norm();
    {
        const ConstraintReport rep = constraints.report(xh, zeta_report);
        result.g_abs_series[0] = rep.g_abs_sum;
        result.violation_series[0] = rep.violation_count;
    }
    result.attack_steps.push_back({0, false, true, 0, 0.0, result.g_abs_series[0],
                                   result.violation_series[0], 0.0});

    // Linearization cache for the optimization strategy.
    ConstraintLinearization lin;
    Eigen::VectorXd lin_point;
    int lin_age = std::numeric_limits<int>::max();

    for (int k = 1; k <= steps; ++k) {
        const double t = k * cfg.dt;
        const Eigen::VectorXd q = ns.disturbance.sample(t);
        const Eigen::VectorXd w = ns.noise.sample_process(settle + k);
        try {
            x = stepper.step(x, u0, q, cfg.dt, w);
        } catch (const SimError& e) {
            throw SimError(std::string(e.what()) + " [simulation] at step " + std::to_string(k),
                           t);
        }
        const Eigen::VectorXd y = measure(sys, x, ns.noise, settle + k);
        const Eigen::VectorXd r_pred = y - c * xh;

        AttackStepRecord rec;
        rec.k = k;
        Eigen::VectorXd a = Eigen::VectorXd::Zero(p);
        std::optional<Eigen::VectorXd> xh_next; // reuse of the checked estimate

        const bool active = cfg.attack && k >= k_star;
        if (active) {
            const AttackConfig& atk = *cfg.attack;
            rec.active = true;
            const bool first = (k == k_star);
            const double c_prev = cusum ? cusum->statistic()[0] : 0.0;
            ScuaOptions sopts{atk.masked, atk.sign_plus};

            auto craft_scua = [&](DetectorType type) -> StealthInjection {
                switch (type) {
                case DetectorType::CusumAgg:
                    return scua_cusum_agg(r_pred, c_prev, det.tau, det.b, det.sigma_sqrt,
                                          det.sigma_inv, targets, first, sopts);
                case DetectorType::Chi2:
                    return scua_chi2(r_pred, det.alpha, det.sigma_sqrt, det.sigma_inv, targets,
                                     sopts);
                case DetectorType::CusumVec:
                    return scua_cusum_vec(r_pred, cusum->statistic(), det.tau_vec, det.b_vec,
                                          targets, first, sopts);
                }
                throw AttackError("unreachable");
            };

            auto estimator_fn = [&](const Eigen::VectorXd& ystar) -> Eigen::VectorXd {
                if (atk.estimator == EstimatorMethod::PseudoInverse)
                    return xh + c_pinv * ystar;
                return Eigen::VectorXd(); // replaced below when prepared
            };

            switch (atk.strategy) {
            case AttackStrategy::ScuaCusumAgg:
            case AttackStrategy::ScuaCusumVec:
            case AttackStrategy::ScuaChi2: {
                const DetectorType want =
                    atk.strategy == AttackStrategy::ScuaCusumAgg  ? DetectorType::CusumAgg
                    : atk.strategy == AttackStrategy::ScuaCusumVec ? DetectorType::CusumVec
                                                                   : DetectorType::Chi2;
                if (want != det.type)
                    throw ConfigError("attack strategy does not match the configured detector");
                const StealthInjection inj = craft_scua(want);
                a = (atk.placement == AttackPlacement::PreSe)
                        ? inj.a
                        : propagate_post_se(inj.target, r_pred, prep.gain, c, cfg.dt);
                rec.feasible = true;
                break;
            }
            case AttackStrategy::Icaa:
            case AttackStrategy::ScaaOpt: {
                const JointObserver::Prepared prepared = observer.prepare(xh, u0, q0);
                ConstraintAwareChecks checks;
                checks.constraints = &constraints;
                checks.g_rows = g_rows;
                checks.h_rows = h_rows;
                checks.zeta = atk.zeta;
                checks.estimator = [&](const Eigen::VectorXd& ystar) {
                    if (atk.estimator == EstimatorMethod::PseudoInverse)
                        return estimator_fn(ystar);
                    return prepared.step(ystar);
                };
                checks.residual_for = [&](const Eigen::VectorXd& ystar,
                                          const Eigen::VectorXd& xstar) -> Eigen::VectorXd {
                    if (atk.placement == AttackPlacement::PreSe) return ystar - c * xh;
                    return ystar - c * xstar;
                };
                switch (det.type) {
                case DetectorType::Chi2:
                    checks.gamma = det.alpha;
                    checks.detector_stat = [&](const Eigen::VectorXd& r) {
                        return r.dot(det.sigma_inv * r);
                    };
                    break;
                case DetectorType::CusumAgg:
                    checks.gamma = det.tau;
                    checks.detector_stat = [&, c_prev](const Eigen::VectorXd& r) {
                        return std::max(0.0, c_prev + r.dot(det.sigma_inv * r) - det.b);
                    };
                    break;
                case DetectorType::CusumVec: {
                    checks.gamma = 0.0;
                    const Eigen::VectorXd c_prev_vec = cusum->statistic();
                    checks.detector_stat = [&, c_prev_vec](const Eigen::VectorXd& r) {
                        double worst = -std::numeric_limits<double>::infinity();
                        for (Eigen::Index i = 0; i < r.size(); ++i) {
                            const double ci =
                                std::max(0.0, c_prev_vec[i] + std::abs(r[i]) - det.b_vec[i]);
                            worst = std::max(worst, ci - det.tau_vec[i]);
                        }
                        return worst;
                    };
                    break;
                }
                }

                if (atk.strategy == AttackStrategy::Icaa) {
                    const StealthInjection init = craft_scua(det.type);
                    const Eigen::VectorXd a_init =
                        (atk.placement == AttackPlacement::PreSe)
                            ? init.a
                            : propagate_post_se(init.target, r_pred, prep.gain, c, cfg.dt);
                    const IcaaResult ir = icaa(y, a_init, checks, {atk.beta, atk.n_max});
                    a = ir.a;
                    rec.feasible = ir.feasible;
                    rec.iterations = ir.iterations;
                    if (atk.estimator == EstimatorMethod::ObserverStep)
                        xh_next = ir.xhat_star;
                    if (!ir.feasible) ++result.infeasible_attack_steps;
                } else {
                    if (lin_age >= atk.linearization_refresh_steps ||
                        (xh - lin_point).norm() > atk.linearization_refresh_dist) {
                        lin = linearize_constraints(constraints, xh);
                        lin_point = xh;
                        lin_age = 0;
                    }
                    ++lin_age;
                    ScaaProblem prob;
                    prob.targets = targets;
                    prob.y = y;
                    prob.r = r_pred;
                    prob.xhat_base = checks.estimator(y);
                    prob.d_mat = d_mat;
                    prob.xhat0 = lin_point;
                    prob.lin = lin;
                    prob.checks = checks;
                    // Per-target bounds |r_i + a_i| <= u_i implied by the
                    // detector budget: quadratic detectors split the energy
                    // left by the untargeted components evenly; the
                    // per-measurement CUSUM bounds each component directly.
                    const int nt = static_cast<int>(targets.size());
                    prob.box_u.resize(nt);
                    if (det.type == DetectorType::CusumVec) {
                        const Eigen::VectorXd cpv = cusum->statistic();
                        for (int ti = 0; ti < nt; ++ti) {
                            const int i = targets[ti];
                            prob.box_u[ti] =
                                std::max(0.0, det.tau_vec[i] + det.b_vec[i] - cpv[i]);
                        }
                    } else {
                        const double z_budget = (det.type == DetectorType::Chi2)
                                                    ? det.alpha
                                                    : det.tau + det.b - c_prev;
                        const Eigen::VectorXd stds = det.sigma.diagonal().cwiseSqrt();
                        std::vector<bool> targeted(p, false);
                        for (int i : targets) targeted[i] = true;
                        double used = 0.0;
                        for (int i = 0; i < p; ++i)
                            if (!targeted[i]) used += (r_pred[i] / stds[i]) * (r_pred[i] / stds[i]);
                        const double left = std::max(0.0, z_budget - used);
                        for (int ti = 0; ti < nt; ++ti)
                            prob.box_u[ti] = stds[targets[ti]] * std::sqrt(left / nt);
                    }
                    const ScaaResult sr = scaa_optimize(prob);
                    if (sr.solver_failure)
                        throw AttackError("attack optimization failed numerically at step " +
                                          std::to_string(k));
                    a = sr.a;
                    rec.feasible = sr.feasible;
                    if (atk.estimator == EstimatorMethod::ObserverStep && sr.feasible)
                        xh_next = sr.xhat_star;
                    if (!sr.feasible) ++result.infeasible_attack_steps;
                }
                break;
            }
            }
            ++result.active_attack_steps;
        }

        const Eigen::VectorXd y_star = y + a;
        // Incremental residual keeps the detector arithmetic identical to the
        // attacker's trim loop.
        const Eigen::VectorXd r_det_pre = r_pred + a;

        double z_now = 0.0, c_now = 0.0;
        bool alarm_now = false;
        auto update_detector = [&](const Eigen::VectorXd& r_det) {
            if (chi2) {
                auto [z, alarm] = chi2->step(r_det);
                z_now = z;
                alarm_now = alarm;
            } else {
                const std::size_t before = cusum->alarm_log().size();
                const Eigen::VectorXd z = cusum->step(r_det);
                z_now = z.maxCoeff();
                c_now = cusum->statistic().maxCoeff();
                alarm_now = cusum->alarm_log().size() > before;
            }
            if (alarm_now) result.alarm_steps.push_back(k);
        };
        if (!cfg.attack || cfg.attack->placement == AttackPlacement::PreSe)
            update_detector(r_det_pre);

        if (xh_next) {
            xh = *xh_next;
        } else {
            try {
                xh = observer.step(xh, y_star, u0, q0);
            } catch (const ObserverError& e) {
                throw ObserverError(std::string(e.what()) + " [estimation] at step " +
                                    std::to_string(k));
            }
        }

        if (cfg.attack && cfg.attack->placement == AttackPlacement::PostSe)
            update_detector(y_star - c * xh);

        result.truth.states.row(k) = x.transpose();
        result.truth.measurements.row(k) = y.transpose();
        result.truth.inputs.row(k) = u0.transpose();
        result.injected.row(k) = a.transpose();
        result.estimate.estimates.row(k) = xh.transpose();
        result.estimate.residuals.row(k) = (y_star - c * xh).transpose();
        result.estimate.error_norms[k] = (xh - x).norm();
        result.detector_z[k] = z_now;
        result.detector_c[k] = c_now;

        const ConstraintReport rep = constraints.report(xh, zeta_report);
        result.g_abs_series[k] = rep.g_abs_sum;
        result.violation_series[k] = rep.violation_count;

        rec.norm_a = a.norm();
        rec.g_abs_sum = rep.g_abs_sum;
        rec.violations = rep.violation_count;
        rec.detector_stat = (det.type == DetectorType::Chi2) ? z_now : c_now;
        result.attack_steps.push_back(rec);
    }

    const MetricSummary metrics =
        compute_metrics(result.truth.states, result.estimate.estimates);
    result.rmse = metrics.rmse;
    result.mae_series = metrics.mae_series;
    result.abs_error = metrics.abs_error;
    result.runtime_seconds =
        std::chrono::duration<double>(clock::now() - t_begin).count();
    return result;
}

std::vector<SweepRow> sweep(SweepParameter parameter, const std::vector<double>& values,
                            const ScenarioConfig& base_cfg) {
    if (!base_cfg.attack) throw ConfigError("sweep requires an attack section in the base config");
    const PreparedCase prep = prepare_case(base_cfg);
    std::vector<SweepRow> rows;
    for (double v : values) {
        ScenarioConfig cfg = base_cfg;
        switch (parameter) {
        case SweepParameter::Beta: cfg.attack->beta = v; break;
        case SweepParameter::Zeta: cfg.attack->zeta = v; break;
        case SweepParameter::NTargets:
            cfg.attack->gamma.clear();
            cfg.attack->target_buses.clear();
            cfg.attack->n_targets = static_cast<int>(v);
            break;
        }
        const ScenarioResult res = run_scenario(cfg, prep);
        SweepRow row;
        row.value = v;
        row.rmse = res.rmse;
        row.runtime_seconds = res.runtime_seconds;
        row.violations = 0;
        for (int viol : res.violation_series) row.violations += viol;
        row.alarms = static_cast<long>(res.alarm_steps.size());
        rows.push_back(row);
    }
    return rows;
}

} // namespace gridsec
