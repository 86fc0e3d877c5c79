#pragma once

#include <cstdint>
#include <vector>

#include "core/ib_allocator.hpp"
#include "core/system_model.hpp"

namespace ehrelay {

// Every device transmits straight to the sink.
Topology direct_topology(int n_devices);

// Minimum spanning tree rooted at the sink, grown Prim-style. Edge cost is
// the reciprocal link carry 1 / (t * log2(1 + snr)) at the uniform slot
// t = T / N_d; ties resolve to the lowest (parent, child) pair.
Topology mst_topology(const NetworkInstance& inst);

// Prim over an explicit cost matrix, exposed for tests. cost[i * (n+1) + j]
// prices attaching device i under node j; the sink is column n.
Topology mst_from_costs(const std::vector<double>& cost, int n_devices);

// One sweep of local parent moves over a seeded device order. Each device
// re-hangs itself under the neighbor maximizing min(own link carry, that
// neighbor's current budget); the sink counts as having infinite budget.
// Moves that would break sink reachability are rejected.
Topology greedy_topology(const NetworkInstance& inst, uint64_t seed);

struct OptimalResult {
    Topology topology;
    IbResult allocation;
    uint64_t enumerated = 0;   // parent assignments visited
    uint64_t valid_count = 0;  // how many were sink-reaching trees
};

// Exhaustive search over all parent assignments, keeping the topology whose
// balanced allocation maximizes the worst-device budget. Cost grows as
// N_d^N_d, so instances above 8 devices are refused.
OptimalResult optimal_topology(const NetworkInstance& inst, const IbConfig& cfg = {});

}  // namespace ehrelay
