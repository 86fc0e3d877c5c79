#include "core/dot_export.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ehrelay {

namespace {

std::string num(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

}  // namespace

std::string export_dot(const NetworkInstance& inst, const Topology& topo,
                       const SlotAllocation& slots) {
    const int n = inst.n_devices;
    if (topo.n_devices() != n) throw std::invalid_argument("export_dot: topology size mismatch");
    if (slots.t.size() != static_cast<size_t>(n))
        throw std::invalid_argument("export_dot: slots size mismatch");

    std::ostringstream out;
    out << "digraph relay_topology {\n";
    out << "  // seed=" << inst.seed << " devices=" << n << " beacons=" << inst.n_beacons
        << "\n";
    for (int b = 0; b < inst.n_beacons; ++b)
        out << "  // beacon " << b << " at (" << num("%.3f", inst.beacon_x[b]) << ", "
            << num("%.3f", inst.beacon_y[b]) << ") m\n";
    out << "  node [shape=circle];\n";
    out << "  sink [shape=doublecircle, pos=\"0.000,0.000!\"];\n";
    for (int i = 0; i < n; ++i) {
        out << "  d" << i << " [pos=\"" << num("%.3f", inst.device_x[i]) << ","
            << num("%.3f", inst.device_y[i]) << "!\", label=\"d" << i << "\\nt="
            << num("%.4f", slots.t[i] * 1e3) << "ms\"];\n";
    }
    for (int i = 0; i < n; ++i) {
        const int p = topo.parent[i];
        const double carry = slots.t[i] * std::log2(1.0 + snr(inst, i, p, slots.t[i]));
        out << "  d" << i << " -> ";
        if (p == n)
            out << "sink";
        else
            out << "d" << p;
        out << " [label=\"" << num("%.6f", carry) << " b/Hz\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace ehrelay
