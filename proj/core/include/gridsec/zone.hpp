#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gridsec/case.hpp"
#include "gridsec/state.hpp"
#include "gridsec/ybus.hpp"

namespace gridsec {

/// Region of the network a measurement perturbation can reach.
struct AttackZone {
    std::vector<int> zone;      // bus ids inside the zone (A)
    std::vector<int> boundary;  // bus ids adjacent to the zone (B)
    std::vector<int> state_indices; // positions into the stacked state (S)
};

struct ZoneOptions {
    int d_max = 3;
    double epsilon = 1e-6; // |Y_ij| above this counts as a connection
};

/// Breadth-first propagation from the target buses: zero-injection neighbours
/// join the zone and keep propagating, non-zero-injection neighbours join the
/// zone but stop the frontier. The boundary collects outside buses coupled to
/// the zone. State indices cover all four machine states of every generator
/// in zone-or-boundary plus (v, theta) of every such bus, along with the
/// machine power outputs.
AttackZone attack_zone(const AdmittanceMatrix& ybus, const std::vector<bool>& zero_injection,
                       const GridCase& grid, const StateLayout& layout,
                       const std::vector<int>& target_bus_ids, const ZoneOptions& opts = {});

} // namespace gridsec
