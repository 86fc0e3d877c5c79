#pragma once

#include <stdexcept>
#include <vector>

#include "core/system_model.hpp"

namespace ehrelay {

// Thrown when the balancer's iteration cap fires before any termination
// condition (spread below eps1, or a detected recurrence) is reached. With
// recurrence detection in place this is a backstop, not an expected path.
struct BalanceCapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Termination knobs for the iterative slot balancer. eps1 bounds the final
// spread between the best and worst per-device budget; eps2 is the smallest
// slot length the bisection will leave a device with.
struct IbConfig {
    double eps1 = 1e-6;  // bits/Hz
    double eps2 = 1e-7;  // seconds
    long max_outer_iterations = 1000000;  // safety cap, then throws
};

// One TDMA slot length per device; sums to the frame length.
struct SlotAllocation {
    std::vector<double> t;
};

struct IbResult {
    SlotAllocation slots;
    double b_ib = 0.0;   // min-device budget at termination, the objective
    double b_max = 0.0;
    std::vector<double> budgets;  // final per-device budgets
    long outer_iterations = 0;
    // Entry feasibility check: every device's carry at slot length 2*eps2
    // stays below eps1. When false the balancer can still run but the
    // eps1 gap is not guaranteed reachable; reported, not enforced.
    bool premise_ok = true;
    // Set when balancing ended on an exact state recurrence instead of the
    // eps1 spread: either a pass moved no time at all (fixpoint) or the slot
    // vector returned bitwise to an earlier state (limit cycle), so further
    // passes would replay the same stretch forever. Both happen when the eps2
    // slot floor blocks the transfers the gap would need; the reported b_ib
    // is the balance the floor permits.
    bool floored = false;
};

// Balances per-device budgets by repeatedly bisecting slot time from the
// richest device to the poorest until the spread drops below eps1 or the
// loop revisits a state (see IbResult::floored). Keeps every slot >= eps2
// and the total exactly on the frame. Throws BalanceCapError only if the
// iteration cap fires before either termination condition.
IbResult allocate(const NetworkInstance& inst, const Topology& topo, const IbConfig& cfg = {});

// Objective shorthand: allocate(...).b_ib.
double b_ib(const NetworkInstance& inst, const Topology& topo, const IbConfig& cfg = {});

}  // namespace ehrelay
