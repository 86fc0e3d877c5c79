#include "core/baselines.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "core/rng.hpp"

namespace ehrelay {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Topology direct_topology(int n_devices) {
    if (n_devices < 1) throw std::invalid_argument("direct_topology: need at least one device");
    Topology t;
    t.parent.assign(n_devices, n_devices);
    return t;
}

Topology mst_from_costs(const std::vector<double>& cost, int n_devices) {
    const int n = n_devices;
    if (n < 1) throw std::invalid_argument("mst_from_costs: need at least one device");
    const size_t cols = static_cast<size_t>(n) + 1;
    if (cost.size() != static_cast<size_t>(n) * cols)
        throw std::invalid_argument("mst_from_costs: cost matrix has wrong shape");

    Topology topo;
    topo.parent.assign(n, -1);
    std::vector<bool> in_tree(cols, false);
    in_tree[n] = true;  // grow from the sink
    for (int added = 0; added < n; ++added) {
        double best = kInf;
        int best_child = -1, best_parent = -1;
        // Scan parents in ascending node order, children ascending, keeping
        // strict improvements only: ties land on the lowest (parent, child).
        for (int j = 0; j <= n; ++j) {
            if (!in_tree[j]) continue;
            for (int i = 0; i < n; ++i) {
                if (in_tree[i] || i == j) continue;
                const double c = cost[static_cast<size_t>(i) * cols + j];
                if (best_child < 0 || c < best) {
                    best = c;
                    best_child = i;
                    best_parent = j;
                } else if (c == best && (j < best_parent ||
                                         (j == best_parent && i < best_child))) {
                    best_child = i;
                    best_parent = j;
                }
            }
        }
        topo.parent[best_child] = best_parent;
        in_tree[best_child] = true;
    }
    return topo;
}

Topology mst_topology(const NetworkInstance& inst) {
    const int n = inst.n_devices;
    if (n < 1) throw std::invalid_argument("mst_topology: need at least one device");
    const double t_uniform = inst.params.frame_s / n;
    const size_t cols = static_cast<size_t>(n) + 1;
    std::vector<double> cost(static_cast<size_t>(n) * cols, kInf);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= n; ++j) {
            if (j == i) continue;
            const double carry = t_uniform * std::log2(1.0 + snr(inst, i, j, t_uniform));
            cost[static_cast<size_t>(i) * cols + j] = 1.0 / carry;  // inf when the link is dead
        }
    }
    return mst_from_costs(cost, n);
}

Topology greedy_topology(const NetworkInstance& inst, uint64_t seed) {
    const int n = inst.n_devices;
    Topology topo = direct_topology(n);
    const double t_uniform = inst.params.frame_s / n;
    const std::vector<double> uniform_slots(n, t_uniform);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
        std::swap(order[i], order[j]);
    }

    for (const int dev : order) {
        const std::vector<double> budget = bits_per_hz(inst, topo, uniform_slots);
        double best_score = -kInf;
        int best_parent = -1;
        for (int j = 0; j <= n; ++j) {
            if (j == dev) continue;
            const double carry = t_uniform * std::log2(1.0 + snr(inst, dev, j, t_uniform));
            const double room = j == n ? kInf : budget[j];
            const double score = carry < room ? carry : room;
            if (score > best_score) {  // strict: ties keep the lowest node index
                best_score = score;
                best_parent = j;
            }
        }
        const int old = topo.parent[dev];
        topo.parent[dev] = best_parent;
        if (!validate_topology(topo)) topo.parent[dev] = old;
    }
    return topo;
}

OptimalResult optimal_topology(const NetworkInstance& inst, const IbConfig& cfg) {
    const int n = inst.n_devices;
    if (n < 1) throw std::invalid_argument("optimal_topology: need at least one device");
    if (n > 8)
        throw std::invalid_argument(
            "optimal_topology: exhaustive search is limited to 8 devices");

    // Each device picks among the n other nodes (every device but itself,
    // plus the sink): n^n assignments in total.
    std::vector<std::vector<int>> choices(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= n; ++j)
            if (j != i) choices[i].push_back(j);

    OptimalResult best;
    bool have_best = false;
    std::vector<int> digit(n, 0);
    Topology topo;
    topo.parent.assign(n, 0);
    while (true) {
        ++best.enumerated;
        for (int i = 0; i < n; ++i) topo.parent[i] = choices[i][digit[i]];
        if (validate_topology(topo)) {
            ++best.valid_count;
            try {
                IbResult alloc = allocate(inst, topo, cfg);
                // Strict improvement keeps the first enumerated argmax.
                if (!have_best || alloc.b_ib > best.allocation.b_ib) {
                    best.topology = topo;
                    best.allocation = std::move(alloc);
                    have_best = true;
                }
            } catch (const BalanceCapError&) {
                // a tree whose gap cannot close is never the argmax; skip it
            }
        }
        // odometer step, last device fastest
        int pos = n - 1;
        while (pos >= 0 && ++digit[pos] == static_cast<int>(choices[pos].size())) {
            digit[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    if (!have_best)
        throw BalanceCapError("optimal_topology: no enumerated tree balanced within the caps");
    return best;
}

}  // namespace ehrelay
