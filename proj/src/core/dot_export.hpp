#pragma once

#include <string>

#include "core/ib_allocator.hpp"
#include "core/system_model.hpp"

namespace ehrelay {

// Graphviz rendering of a solved topology: one node per device plus the sink,
// one edge per device toward its parent, annotated with positions, slot
// lengths and per-link carries. Beacons appear as comments. Output is fully
// deterministic for a given (instance, topology, slots).
std::string export_dot(const NetworkInstance& inst, const Topology& topo,
                       const SlotAllocation& slots);

}  // namespace ehrelay
