#include "gridsec/scenario.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "gridsec/rng.hpp"

namespace gridsec {

using nlohmann::json;

namespace {

// Shortest round-trip formatting keeps files byte-stable across runs.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw ConfigError("cannot write " + path.string());
    }
    void header(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i)
            out_ << (i ? "," : "") << names[i];
        out_ << "\n";
    }
    void row_start(const std::string& first) { out_ << first; }
    void cell(double v) { out_ << "," << fmt(v); }
    void cell_raw(const std::string& s) { out_ << "," << s; }
    void row_end() { out_ << "\n"; }

private:
    std::ofstream out_;
};

void write_matrix_csv(const std::filesystem::path& path, const std::string& index_name,
                      const std::vector<std::string>& col_names, double dt,
                      const Eigen::MatrixXd& data) {
    CsvWriter csv(path);
    std::vector<std::string> names{index_name};
    names.insert(names.end(), col_names.begin(), col_names.end());
    csv.header(names);
    for (Eigen::Index k = 0; k < data.rows(); ++k) {
        csv.row_start(fmt(k * dt));
        for (Eigen::Index j = 0; j < data.cols(); ++j) csv.cell(data(k, j));
        csv.row_end();
    }
}

} // namespace

void export_result(const ScenarioConfig& cfg, const ScenarioResult& result,
                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string prefix = cfg.name;
    const GridCase grid = load_case_file(cfg.case_path);
    const StateLayout layout(grid.n_generators(), grid.n_buses());
    const std::vector<std::string> state_names = layout.state_names(grid);

    write_matrix_csv(dir / (prefix + ".states.csv"), "t", state_names, cfg.dt,
                     result.truth.states);
    write_matrix_csv(dir / (prefix + ".estimates.csv"), "t", state_names, cfg.dt,
                     result.estimate.estimates);
    write_matrix_csv(dir / (prefix + ".abs_error.csv"), "t", state_names, cfg.dt,
                     result.abs_error);

    {
        std::vector<std::string> names(result.truth.measurements.cols());
        for (std::size_t i = 0; i < names.size(); ++i) names[i] = "y" + std::to_string(i + 1);
        write_matrix_csv(dir / (prefix + ".measurements.csv"), "t", names, cfg.dt,
                         result.truth.measurements);
    }

    {
        CsvWriter csv(dir / (prefix + ".detector.csv"));
        csv.header({"k", "z", "c", "alarm"});
        std::size_t alarm_pos = 0;
        for (Eigen::Index k = 0; k < result.detector_z.size(); ++k) {
            bool alarm = false;
            while (alarm_pos < result.alarm_steps.size() && result.alarm_steps[alarm_pos] < k)
                ++alarm_pos;
            if (alarm_pos < result.alarm_steps.size() && result.alarm_steps[alarm_pos] == k)
                alarm = true;
            csv.row_start(std::to_string(k));
            csv.cell(result.detector_z[k]);
            csv.cell(result.detector_c[k]);
            csv.cell_raw(alarm ? "1" : "0");
            csv.row_end();
        }
    }

    {
        CsvWriter csv(dir / (prefix + ".attack.csv"));
        csv.header({"k", "feasible", "iterations", "norm_a", "g_abs_sum", "violations",
                    "detector_stat"});
        for (const auto& rec : result.attack_steps) {
            csv.row_start(std::to_string(rec.k));
            csv.cell_raw(rec.feasible ? "1" : "0");
            csv.cell_raw(std::to_string(rec.iterations));
            csv.cell(rec.norm_a);
            csv.cell(rec.g_abs_sum);
            csv.cell_raw(std::to_string(rec.violations));
            csv.cell(rec.detector_stat);
            csv.row_end();
        }
    }

    {
        CsvWriter csv(dir / (prefix + ".metrics.csv"));
        csv.header({"t", "mae", "error_norm", "g_abs_sum", "violations"});
        for (Eigen::Index k = 0; k < result.mae_series.size(); ++k) {
            csv.row_start(fmt(k * cfg.dt));
            csv.cell(result.mae_series[k]);
            csv.cell(result.estimate.error_norms[k]);
            csv.cell(result.g_abs_series[k]);
            csv.cell_raw(std::to_string(result.violation_series[k]));
            csv.row_end();
        }
    }

    json manifest;
    manifest["name"] = cfg.name;
    manifest["dt"] = cfg.dt;
    manifest["horizon_s"] = cfg.horizon_s;
    manifest["seed"] = cfg.seed;
    manifest["case_hash"] = result.case_hash;
    manifest["config_hash"] = fnv1a64(cfg.raw_json.data(), cfg.raw_json.size());
    manifest["detector"] = detector_type_name(result.detector.type);
    manifest["schema"] = {{"states", 1}, {"detector", 1}, {"attack", 1}, {"metrics", 1}};
    manifest["rmse"] = result.rmse;
    manifest["alarms"] = result.alarm_steps.size();
    std::ofstream mf(dir / (prefix + ".manifest.json"));
    if (!mf) throw ConfigError("cannot write manifest");
    mf << manifest.dump(2) << "\n";
}

void export_calibration(const DetectorSettings& settings, std::int64_t history_length,
                        const std::filesystem::path& path) {
    json j;
    j["detector"] = detector_type_name(settings.type);
    j["history_length"] = history_length;
    j["achieved_false_alarm_interval"] = settings.achieved_interval;
    switch (settings.type) {
    case DetectorType::Chi2:
        j["alpha"] = settings.alpha;
        break;
    case DetectorType::CusumAgg:
        j["tau"] = settings.tau;
        j["b"] = settings.b;
        break;
    case DetectorType::CusumVec: {
        j["tau"] = std::vector<double>(settings.tau_vec.data(),
                                       settings.tau_vec.data() + settings.tau_vec.size());
        j["b"] = std::vector<double>(settings.b_vec.data(),
                                     settings.b_vec.data() + settings.b_vec.size());
        break;
    }
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write calibration report " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace gridsec
