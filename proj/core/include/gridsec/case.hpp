#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsec {

/// Error in the textual case description, with a 1-based line number when the
/// problem is tied to a specific line (0 for file-level semantic errors).
class CaseError : public std::runtime_error {
public:
    CaseError(std::string msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

enum class BusType { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double v_set = 1.0;   // per-unit setpoint (used for slack/PV buses)
    double p_load = 0.0;  // per-unit
    double q_load = 0.0;  // per-unit
    double v_min = 0.9;   // per-unit operational limits
    double v_max = 1.1;
    bool zero_injection = false;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;       // per-unit series impedance
    double x = 0.0;
    double b_shunt = 0.0; // per-unit total line charging susceptance
    double rating = 0.0;  // per-unit apparent-power limit; 0 = unlimited
};

struct GeneratorParams {
    double inertia = 0.0;      // M, s^2/rad on the system base
    double damping = 0.0;      // D, per-unit torque per rad/s
    double x_d = 0.0;          // synchronous reactances
    double x_d_prime = 0.0;    // transient reactances
    double x_q = 0.0;
    double x_q_prime = 0.0;
    double t_d0_prime = 0.0;   // open-circuit time constants, seconds
    double t_q0_prime = 0.0;
    double omega0 = 2.0 * 3.14159265358979323846 * 60.0; // rad/s
};

struct Generator {
    int bus = 0;
    double p_gen = 0.0;   // scheduled output, per-unit (initial Q guess for PV)
    double q_gen = 0.0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    GeneratorParams params;
};

/// Static network description: buses, branches, generators, PMU placement.
/// Immutable after construction; validated on parse.
struct GridCase {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<int> pmu_buses;
    /// Lines (by from/to bus id) whose current phasors are measured.
    std::vector<std::pair<int, int>> pmu_lines;

    int n_buses() const { return static_cast<int>(buses.size()); }
    int n_generators() const { return static_cast<int>(generators.size()); }

    /// Dense 0-based index of a bus id; throws CaseError for unknown ids.
    int bus_index(int id) const;
    /// Generator index at a bus, or -1 when the bus has no machine.
    int generator_at_bus(int bus_idx) const;
    int slack_bus_index() const;

    /// Zero-injection classification per bus, as marked in the case file.
    std::vector<bool> zero_injection_flags() const;
};

/// Parse the plain-text case format (sections [bus], [branch], [gen], [pmu],
/// [pmu_lines]; powers in MW/MVAr and angles in degrees on disk). Validates
/// all structural invariants and converts to per-unit/radians.
GridCase parse_case(const std::string& text);

GridCase load_case_file(const std::filesystem::path& path);

/// FNV-1a hash of the raw case file bytes, for reproducibility manifests.
std::uint64_t hash_case_text(const std::string& text);

} // namespace gridsec
