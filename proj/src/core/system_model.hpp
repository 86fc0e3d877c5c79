#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ehrelay {

// ===== physical parameters ==================================================

// Deployment constants. Defaults describe the usual LPWAN-style cell:
// alpha=3, 125 kHz band, 6 dB noise figure, 1 W beacons, 70% RF-to-DC
// conversion, 100 ms TDMA frame, 0.5 km radius. Distances run in km with
// the bare d^-alpha law, which puts link budgets in the fractional
// bits/Hz range a LPWAN cell actually sees.
struct SystemParams {
    double pathloss_exponent = 3.0;
    double bandwidth_hz = 125e3;
    double noise_figure_db = 6.0;
    double pb_power_w = 1.0;
    double conversion_efficiency = 0.7;
    double frame_s = 0.1;
    double radius_km = 0.5;
    double min_distance_km = 0.001;  // lower clamp applied before d^-alpha

    // Thermal floor plus noise figure over the whole band, in watts:
    // dBm = -174 + NF + 10*log10(BW).
    double noise_w() const;

    void validate() const;  // throws std::invalid_argument
};

// Clamped power-law attenuation max(d, min_distance)^-alpha.
double pathloss(const SystemParams& p, double distance_km);

// ===== relay topology =======================================================

// Hard relay topology over devices 0..N_d-1 plus the sink at index N_d.
// parent[i] == i encodes a self-loop row; representable but never valid.
struct Topology {
    std::vector<int> parent;

    int n_devices() const { return static_cast<int>(parent.size()); }
    int sink() const { return n_devices(); }

    // Row-major N_d x (N_d+1) one-hot expansion.
    std::vector<double> dense() const;
};

// Inverse of Topology::dense(); throws if any row is not one-hot.
Topology topology_from_dense(const std::vector<double>& rows, int n_devices);

// True iff every device reaches the sink through the parent map (each parent
// index in range, no cycles among devices).
bool validate_topology(const Topology& topo);

// ===== sampled network ======================================================

// One sampled network: node positions, block-fading gains, harvested
// energies. Plain data, immutable by convention after generation; safe to
// share across threads.
struct NetworkInstance {
    uint64_t seed = 0;
    int n_devices = 0;
    int n_beacons = 0;
    SystemParams params;

    std::vector<double> device_x, device_y;  // length N_d; sink at the origin
    std::vector<double> beacon_x, beacon_y;  // length N_b

    // Squared fading magnitudes |h|^2, unit-mean exponential, drawn once per
    // instance. gain_node is row-major N_d x (N_d+1), transmitter device ->
    // receiver node; the diagonal is 0 since a node has no channel to itself.
    std::vector<double> gain_node;
    std::vector<double> gain_beacon;  // N_b x N_d, beacon -> device

    std::vector<double> harvested_j;  // E_n per device, joules

    // Derived from positions; rebuilt on load, never serialized.
    std::vector<double> dist_node;    // N_d x (N_d+1), km, unclamped
    std::vector<double> dist_beacon;  // N_b x N_d

    double gain(int from_device, int to_node) const {
        return gain_node[static_cast<size_t>(from_device) * (n_devices + 1) + to_node];
    }
    double dist(int from_device, int to_node) const {
        return dist_node[static_cast<size_t>(from_device) * (n_devices + 1) + to_node];
    }

    void rebuild_distances();
};

// Samples positions uniformly over the disk, draws fading, fills energies.
// Deterministic in (seed, n_devices, n_beacons, params).
NetworkInstance generate_instance(uint64_t seed, int n_devices, int n_beacons,
                                  const SystemParams& params);

// E_n = eta * T * sum_b Pb * |h|^2 * pathloss(d), recomputed from fields.
std::vector<double> harvested_energy(const NetworkInstance& inst);

// Receive SNR at `to_node` when `from_device` spends its whole harvest over
// a slot of length slot_t. Zero for the self channel or when E_n is zero.
double snr(const NetworkInstance& inst, int from_device, int to_node, double slot_t);

// Per-device net budget B_k in bits/Hz: own outbound link carry minus the
// carry of the children it has to relay. `slots` holds one slot length per
// device.
std::vector<double> bits_per_hz(const NetworkInstance& inst, const Topology& topo,
                                const std::vector<double>& slots);

// ===== serialization ========================================================

// Line-oriented text form, bit-exact round trip (doubles printed with %.17g).
std::string instance_to_text(const NetworkInstance& inst);
NetworkInstance instance_from_text(const std::string& text);

void save_instance(const NetworkInstance& inst, const std::string& path);
NetworkInstance load_instance(const std::string& path);

}  // namespace ehrelay
