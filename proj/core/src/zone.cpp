#include "gridsec/zone.hpp"

#include <algorithm>
#include <set>

namespace gridsec {

AttackZone attack_zone(const AdmittanceMatrix& ybus, const std::vector<bool>& zero_injection,
                       const GridCase& grid, const StateLayout& layout,
                       const std::vector<int>& target_bus_ids, const ZoneOptions& opts) {
    const int n = static_cast<int>(ybus.rows());
    if (static_cast<int>(zero_injection.size()) != n)
        throw CaseError("zero-injection classification has wrong length");

    std::set<int> zone;     // dense indices
    std::set<int> visited;  // expanded or queued
    std::vector<int> frontier;
    for (int id : target_bus_ids) {
        const int b = grid.bus_index(id); // throws for unknown targets
        zone.insert(b);
        visited.insert(b);
        frontier.push_back(b);
    }

    auto neighbours = [&](int i) {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            if (j != i && std::abs(ybus(i, j)) > opts.epsilon) out.push_back(j);
        return out;
    };

    for (int depth = 0; depth < opts.d_max && !frontier.empty(); ++depth) {
        std::vector<int> next;
        for (int i : frontier) {
            for (int j : neighbours(i)) {
                if (visited.count(j)) continue;
                visited.insert(j);
                zone.insert(j);
                if (zero_injection[j]) next.push_back(j);
            }
        }
        frontier = std::move(next);
    }

    std::set<int> boundary;
    for (int i : zone)
        for (int j : neighbours(i))
            if (!zone.count(j)) boundary.insert(j);

    std::set<int> covered = zone;
    covered.insert(boundary.begin(), boundary.end());

    AttackZone result;
    for (int b : zone) result.zone.push_back(grid.buses[b].id);
    for (int b : boundary) result.boundary.push_back(grid.buses[b].id);
    std::sort(result.zone.begin(), result.zone.end());
    std::sort(result.boundary.begin(), result.boundary.end());

    std::set<int> states;
    for (int g = 0; g < grid.n_generators(); ++g) {
        const int b = grid.bus_index(grid.generators[g].bus);
        if (!covered.count(b)) continue;
        states.insert(layout.delta(g));
        states.insert(layout.omega(g));
        states.insert(layout.e_q(g));
        states.insert(layout.e_d(g));
        states.insert(layout.p_g(g));
        states.insert(layout.q_g(g));
    }
    for (int b : covered) {
        states.insert(layout.v(b));
        states.insert(layout.theta(b));
    }
    result.state_indices.assign(states.begin(), states.end());
    return result;
}

} // namespace gridsec
