#include "gridsec/case.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gridsec/rng.hpp"

namespace gridsec {

int GridCase::bus_index(int id) const {
    for (int i = 0; i < n_buses(); ++i)
        if (buses[i].id == id) return i;
    throw CaseError("unknown bus id " + std::to_string(id));
}

int GridCase::generator_at_bus(int bus_idx) const {
    for (int g = 0; g < n_generators(); ++g)
        if (bus_index(generators[g].bus) == bus_idx) return g;
    return -1;
}

int GridCase::slack_bus_index() const {
    for (int i = 0; i < n_buses(); ++i)
        if (buses[i].type == BusType::Slack) return i;
    throw CaseError("case has no slack bus");
}

std::vector<bool> GridCase::zero_injection_flags() const {
    std::vector<bool> flags(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) flags[i] = buses[i].zero_injection;
    return flags;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Tokenizer {
    std::istringstream in;
    int line_no;
    explicit Tokenizer(const std::string& line, int no) : in(line), line_no(no) {}

    double number(const char* what) {
        double v;
        if (!(in >> v)) throw CaseError(std::string("expected numeric ") + what, line_no);
        return v;
    }
    int integer(const char* what) {
        double v = number(what);
        double r = std::round(v);
        if (std::abs(v - r) > 1e-9)
            throw CaseError(std::string(what) + " must be an integer", line_no);
        return static_cast<int>(r);
    }
    std::string word(const char* what) {
        std::string s;
        if (!(in >> s)) throw CaseError(std::string("expected ") + what, line_no);
        return s;
    }
    bool done() {
        std::string rest;
        return !(in >> rest);
    }
};

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void validate(const GridCase& grid) {
    if (grid.base_mva <= 0.0) throw CaseError("base_mva must be positive");
    if (grid.buses.empty()) throw CaseError("case has no buses");

    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : grid.buses) {
        if (!ids.insert(b.id).second)
            throw CaseError("duplicate bus id " + std::to_string(b.id));
        if (b.type == BusType::Slack) ++slack_count;
        if (b.v_min < 0.0 || b.v_max < b.v_min)
            throw CaseError("bus " + std::to_string(b.id) + " has invalid voltage limits");
    }
    if (slack_count != 1)
        throw CaseError("case must have exactly one slack bus, found " +
                        std::to_string(slack_count));

    auto known = [&](int id) { return ids.count(id) != 0; };
    for (const auto& br : grid.branches) {
        if (!known(br.from) || !known(br.to))
            throw CaseError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                            " references an unknown bus");
        if (br.from == br.to)
            throw CaseError("branch endpoints must differ (bus " + std::to_string(br.from) + ")");
        if (br.rating < 0.0) throw CaseError("branch rating must be nonnegative");
    }

    std::set<int> gen_buses;
    for (const auto& g : grid.generators) {
        if (!known(g.bus))
            throw CaseError("generator references unknown bus " + std::to_string(g.bus));
        if (!gen_buses.insert(g.bus).second)
            throw CaseError("multiple generators on bus " + std::to_string(g.bus) +
                            " are not supported");
        const auto& p = g.params;
        if (p.inertia <= 0.0) throw CaseError("generator inertia must be positive");
        if (p.x_d <= 0.0 || p.x_d_prime <= 0.0 || p.x_q <= 0.0 || p.x_q_prime <= 0.0 ||
            p.t_d0_prime <= 0.0 || p.t_q0_prime <= 0.0)
            throw CaseError("generator reactances and time constants must be positive");
        if (p.x_d < p.x_d_prime || p.x_q < p.x_q_prime)
            throw CaseError("generator transient reactances must not exceed synchronous ones");
        if (g.p_max < g.p_min || g.q_max < g.q_min)
            throw CaseError("generator limits must satisfy min <= max");
    }

    for (int id : grid.pmu_buses)
        if (!known(id)) throw CaseError("PMU placed on unknown bus " + std::to_string(id));

    for (auto [f, t] : grid.pmu_lines) {
        bool found = false;
        for (const auto& br : grid.branches)
            if ((br.from == f && br.to == t) || (br.from == t && br.to == f)) found = true;
        if (!found)
            throw CaseError("PMU line " + std::to_string(f) + "-" + std::to_string(t) +
                            " does not match any branch");
    }
}

} // namespace

GridCase parse_case(const std::string& text) {
    GridCase grid;
    grid.base_mva = 100.0;

    enum class Section { None, Bus, Branch, Gen, Pmu, PmuLines };
    Section section = Section::None;

    double omega0 = 2.0 * kPi * 60.0;
    std::vector<std::pair<int, bool>> explicit_zero; // bus id -> flag given

    std::istringstream stream(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string line = strip(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line == "[bus]") section = Section::Bus;
            else if (line == "[branch]") section = Section::Branch;
            else if (line == "[gen]") section = Section::Gen;
            else if (line == "[pmu]") section = Section::Pmu;
            else if (line == "[pmu_lines]") section = Section::PmuLines;
            else throw CaseError("unknown section " + line, line_no);
            continue;
        }

        Tokenizer tok(line, line_no);
        if (section == Section::None) {
            std::string key = tok.word("key");
            if (key == "base_mva") grid.base_mva = tok.number("base_mva");
            else if (key == "omega0") omega0 = tok.number("omega0");
            else throw CaseError("unknown key '" + key + "' before first section", line_no);
            if (!tok.done()) throw CaseError("trailing tokens after " + key, line_no);
            continue;
        }

        switch (section) {
        case Section::Bus: {
            Bus b;
            b.id = tok.integer("bus id");
            std::string type = tok.word("bus type");
            if (type == "slack") b.type = BusType::Slack;
            else if (type == "PV" || type == "pv") b.type = BusType::PV;
            else if (type == "PQ" || type == "pq") b.type = BusType::PQ;
            else throw CaseError("unknown bus type '" + type + "'", line_no);
            b.v_set = tok.number("v_set");
            b.p_load = tok.number("p_load") / grid.base_mva;
            b.q_load = tok.number("q_load") / grid.base_mva;
            b.v_min = tok.number("v_min");
            b.v_max = tok.number("v_max");
            b.zero_injection = tok.integer("zero_injection flag") != 0;
            if (!tok.done()) throw CaseError("trailing tokens in bus row", line_no);
            grid.buses.push_back(b);
            break;
        }
        case Section::Branch: {
            Branch br;
            br.from = tok.integer("from bus");
            br.to = tok.integer("to bus");
            br.r = tok.number("r");
            br.x = tok.number("x");
            br.b_shunt = tok.number("b_shunt");
            br.rating = tok.number("rating") / grid.base_mva;
            if (!tok.done()) throw CaseError("trailing tokens in branch row", line_no);
            grid.branches.push_back(br);
            break;
        }
        case Section::Gen: {
            Generator g;
            g.bus = tok.integer("gen bus");
            g.p_gen = tok.number("p_gen") / grid.base_mva;
            g.q_gen = tok.number("q_gen") / grid.base_mva;
            g.p_min = tok.number("p_min") / grid.base_mva;
            g.p_max = tok.number("p_max") / grid.base_mva;
            g.q_min = tok.number("q_min") / grid.base_mva;
            g.q_max = tok.number("q_max") / grid.base_mva;
            g.params.inertia = tok.number("M");
            g.params.damping = tok.number("D");
            g.params.x_d = tok.number("x_d");
            g.params.x_d_prime = tok.number("x_d_prime");
            g.params.x_q = tok.number("x_q");
            g.params.x_q_prime = tok.number("x_q_prime");
            g.params.t_d0_prime = tok.number("T_d0_prime");
            g.params.t_q0_prime = tok.number("T_q0_prime");
            g.params.omega0 = omega0;
            if (!tok.done()) throw CaseError("trailing tokens in gen row", line_no);
            grid.generators.push_back(g);
            break;
        }
        case Section::Pmu: {
            Tokenizer t2(line, line_no);
            while (true) {
                std::string w;
                if (!(t2.in >> w)) break;
                grid.pmu_buses.push_back(std::stoi(w));
            }
            break;
        }
        case Section::PmuLines: {
            int f = tok.integer("from bus");
            int t = tok.integer("to bus");
            if (!tok.done()) throw CaseError("trailing tokens in pmu_lines row", line_no);
            grid.pmu_lines.emplace_back(f, t);
            break;
        }
        case Section::None:
            break;
        }
    }

    validate(grid);
    return grid;
}

GridCase load_case_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CaseError("cannot open case file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::uint64_t hash_case_text(const std::string& text) {
    return fnv1a64(text.data(), text.size());
}

} // namespace gridsec
