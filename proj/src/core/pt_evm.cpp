#include "core/pt_evm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ehrelay {

namespace {

// Inbound sums below this are treated as "nothing to split": the ratio
// degenerates to 1 and every (zero) carry passes through unchanged.
constexpr double kInboundFloor = 1e-30;

struct Walk {
    const NetworkInstance& inst;
    const std::vector<ad::Var>& soft;
    const PtConfig& cfg;
    ad::Tape& tape;
    const PtProbes* probes;

    int n;          // device count
    int cols;       // n + 1
    double slot;    // common slot length
    double noise;
    ad::Var one;

    RateAssessment out;

    ad::Var soft_at(int i, int j) const {
        return soft[static_cast<size_t>(i) * cols + j];
    }

    // Uncongested carry of the j -> to link over the common slot. Distance
    // priced only, unless the config folds fading in.
    double link_rate(int j, int to) const {
        if (j == to) return 0.0;
        double gamma = (inst.harvested_j[j] / slot) *
                       pathloss(inst.params, inst.dist(j, to)) / noise;
        if (cfg.include_fading) gamma *= inst.gain(j, to);
        return slot * std::log2(1.0 + gamma);
    }

    void expand(int focus, const ad::Var* budget) {
        NodeTrace trace;
        trace.node = focus;
        trace.unbounded = budget == nullptr;

        // Weighted carries of every link pointing at the focus.
        std::vector<ad::Var> carry(n);
        ad::Var inbound;
        for (int j = 0; j < n; ++j) {
            carry[j] = tape.mul(soft_at(j, focus), tape.leaf(link_rate(j, focus)));
            inbound = j == 0 ? carry[j] : tape.add(inbound, carry[j]);
        }
        trace.inbound_sum = tape.value(inbound);

        ad::Var ratio;
        if (budget == nullptr) {
            // Sink: nothing upstream constrains it, carries pass whole.
            ratio = one;
            trace.budget = std::numeric_limits<double>::infinity();
        } else {
            // The focus keeps an equal share of its own budget alongside its
            // inbound links, then splits the rest proportionally. The split
            // ratio is a congestion measurement, not a path for gradients,
            // so its three ingredients are detached.
            ad::Var denom = one;
            for (int j = 0; j < n; ++j) denom = tape.add(denom, soft_at(j, focus));
            ad::Var self_share = tape.div(*budget, denom);
            trace.budget = tape.value(*budget);
            trace.self_share = tape.value(self_share);

            ad::Var in_used = probes ? tape.add(inbound, probes->inbound_sum) : inbound;
            ad::Var b_used = probes ? tape.add(*budget, probes->budget) : *budget;
            ad::Var rs_used = probes ? tape.add(self_share, probes->self_share) : self_share;
            ad::Var d_in = tape.detach(in_used);
            ad::Var d_b = tape.detach(b_used);
            ad::Var d_rs = tape.detach(rs_used);
            if (tape.value(d_in) < kInboundFloor)
                ratio = one;
            else
                ratio = tape.min2(one, tape.div(tape.sub(d_b, d_rs), d_in));
        }

        double granted_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const ad::Var g = tape.mul(carry[j], ratio);
            out.granted[static_cast<size_t>(j) * cols + focus] = g;
            granted_sum += tape.value(g);
        }
        trace.granted_sum = granted_sum;
        if (focus < n) out.visited[focus] = 1;
        out.expansions.push_back(trace);

        for (int j = 0; j < n; ++j) {
            const ad::Var g = out.granted[static_cast<size_t>(j) * cols + focus];
            if (!out.visited[j] && tape.value(g) >= cfg.budget_threshold) expand(j, &g);
        }
    }
};

}  // namespace

RateAssessment rate_pt(const NetworkInstance& inst, const std::vector<ad::Var>& soft,
                       const PtConfig& cfg, ad::Tape& tape, const PtProbes* probes) {
    const int n = inst.n_devices;
    const int cols = n + 1;
    if (soft.size() != static_cast<size_t>(n) * cols)
        throw std::invalid_argument("rate_pt: adjacency has wrong shape");
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < cols; ++j) row += tape.value(soft[static_cast<size_t>(i) * cols + j]);
        if (std::fabs(row - 1.0) > 1e-6)
            throw std::invalid_argument("rate_pt: adjacency row " + std::to_string(i) +
                                        " does not sum to 1");
    }

    Walk walk{inst, soft, cfg, tape, probes,
              n, cols,
              cfg.slot_scale > 0 ? cfg.slot_scale : inst.params.frame_s / n,
              inst.params.noise_w(), tape.leaf(1.0), {}};
    walk.out.n_devices = n;
    const ad::Var zero = tape.leaf(0.0);
    walk.out.granted.assign(static_cast<size_t>(n) * cols, zero);
    walk.out.visited.assign(n, 0);

    walk.expand(n, nullptr);  // start at the sink, budget unbounded

    // Opposite grants cancel; only the surplus direction survives. Grants
    // toward the sink have no opposite link.
    walk.out.net_rate.assign(static_cast<size_t>(n) * cols, zero);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            walk.out.net_rate[static_cast<size_t>(i) * cols + j] =
                tape.relu(tape.sub(walk.out.granted_at(i, j), walk.out.granted_at(j, i)));
        walk.out.net_rate[static_cast<size_t>(i) * cols + n] = walk.out.granted_at(i, n);
    }
    walk.out.rate_sim.resize(n);
    for (int i = 0; i < n; ++i) {
        ad::Var acc = walk.out.net_at(i, 0);
        for (int j = 1; j < cols; ++j) acc = tape.add(acc, walk.out.net_at(i, j));
        walk.out.rate_sim[i] = acc;
    }
    return std::move(walk.out);
}

RateAssessment rate_pt(const NetworkInstance& inst, const Topology& topo, const PtConfig& cfg,
                       ad::Tape& tape) {
    const std::vector<double> dense = topo.dense();
    std::vector<ad::Var> soft(dense.size());
    for (size_t k = 0; k < dense.size(); ++k) soft[k] = tape.leaf(dense[k]);
    return rate_pt(inst, soft, cfg, tape);
}

ad::Var training_loss(const RateAssessment& assessment, ad::Tape& tape) {
    const int n = assessment.n_devices;
    if (n < 1) throw std::invalid_argument("training_loss: empty assessment");
    ad::Var acc;
    for (int i = 0; i < n; ++i) {
        const ad::Var term = tape.exp(tape.neg(assessment.rate_sim[i]));
        acc = i == 0 ? term : tape.add(acc, term);
    }
    return tape.affine(1.0 / n, acc, 0.0);
}

}  // namespace ehrelay
