#pragma once

#include <cstdint>
#include <vector>

#include "core/autodiff.hpp"
#include "core/system_model.hpp"

namespace ehrelay {

// Knobs for the propagating-tree rate walk.
struct PtConfig {
    // Slot length assumed for every device; <= 0 means frame / N_d.
    double slot_scale = 0.0;
    // Budgets below this do not get their own subtree expansion.
    double budget_threshold = 0.01;
    // The walk prices links on distance only by default; set to fold the
    // per-instance fading draw into the link SNR as well.
    bool include_fading = false;
};

// Per-expansion diagnostics, values only (no gradient information).
struct NodeTrace {
    int node = -1;           // the focused receiver
    bool unbounded = false;  // true only for the sink expansion
    double budget = 0.0;
    double self_share = 0.0;
    double inbound_sum = 0.0;
    double granted_sum = 0.0;
};

// Optional gradient-stop probes: zero-valued vars the caller created on the
// same tape. Each is added to the named quantity right before it is detached,
// so any gradient reaching them would expose a leak through the stop.
struct PtProbes {
    ad::Var inbound_sum;
    ad::Var budget;
    ad::Var self_share;
};

// Everything the walk produced, as live tape vars.
struct RateAssessment {
    int n_devices = 0;
    std::vector<ad::Var> granted;   // N_d x (N_d+1): rate node j grants device i
    std::vector<ad::Var> net_rate;  // N_d x (N_d+1): grants after two-way cancel
    std::vector<ad::Var> rate_sim;  // per-device deliverable rate, length N_d
    std::vector<uint8_t> visited;   // which devices got expanded
    std::vector<NodeTrace> expansions;

    ad::Var granted_at(int i, int j) const {
        return granted[static_cast<size_t>(i) * (n_devices + 1) + j];
    }
    ad::Var net_at(int i, int j) const {
        return net_rate[static_cast<size_t>(i) * (n_devices + 1) + j];
    }
};

// Walks the relay tree implied by a soft adjacency, sink outward, splitting
// each node's budget across its inbound links in proportion to their
// uncongested carry. Differentiable in the adjacency entries; the congestion
// ratio itself is value-only (detached), so gradients flow through the link
// weights alone. Rows of `soft` must each sum to 1 within 1e-6.
RateAssessment rate_pt(const NetworkInstance& inst, const std::vector<ad::Var>& soft,
                       const PtConfig& cfg, ad::Tape& tape, const PtProbes* probes = nullptr);

// Hard-topology convenience: runs the same walk on the one-hot expansion.
RateAssessment rate_pt(const NetworkInstance& inst, const Topology& topo, const PtConfig& cfg,
                       ad::Tape& tape);

// Mean of exp(-rate_sim) over devices: 1 when nothing flows, decaying toward
// 0 as every device's deliverable rate grows.
ad::Var training_loss(const RateAssessment& assessment, ad::Tape& tape);

}  // namespace ehrelay
