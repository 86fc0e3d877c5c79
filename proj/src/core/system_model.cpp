#include "core/system_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "core/rng.hpp"
#include "core/textio.hpp"

namespace ehrelay {

namespace {

constexpr double kPi = 3.14159265358979323846;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

constexpr auto fmt = fmt_double;  // local shorthand

}  // namespace

// ===== SystemParams =========================================================

double SystemParams::noise_w() const {
    const double dbm = -174.0 + noise_figure_db + 10.0 * std::log10(bandwidth_hz);
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

void SystemParams::validate() const {
    if (!(pathloss_exponent > 0)) fail("pathloss_exponent must be > 0");
    if (!(bandwidth_hz > 0)) fail("bandwidth_hz must be > 0");
    if (!(pb_power_w > 0)) fail("pb_power_w must be > 0");
    if (!(conversion_efficiency > 0) || conversion_efficiency > 1)
        fail("conversion_efficiency must be in (0, 1]");
    if (!(frame_s > 0)) fail("frame_s must be > 0");
    if (!(radius_km > 0)) fail("radius_km must be > 0");
    if (!(min_distance_km > 0)) fail("min_distance_km must be > 0");
    if (!std::isfinite(noise_figure_db)) fail("noise_figure_db must be finite");
}

double pathloss(const SystemParams& p, double distance_km) {
    const double d = distance_km < p.min_distance_km ? p.min_distance_km : distance_km;
    return std::pow(d, -p.pathloss_exponent);
}

// ===== Topology =============================================================

std::vector<double> Topology::dense() const {
    const int n = n_devices();
    std::vector<double> rows(static_cast<size_t>(n) * (n + 1), 0.0);
    for (int i = 0; i < n; ++i) {
        const int p = parent[i];
        if (p < 0 || p > n) fail("parent index out of range");
        rows[static_cast<size_t>(i) * (n + 1) + p] = 1.0;
    }
    return rows;
}

Topology topology_from_dense(const std::vector<double>& rows, int n_devices) {
    if (n_devices < 1) fail("need at least one device");
    const size_t cols = static_cast<size_t>(n_devices) + 1;
    if (rows.size() != static_cast<size_t>(n_devices) * cols)
        fail("dense adjacency has wrong shape");
    Topology t;
    t.parent.resize(n_devices, -1);
    for (int i = 0; i < n_devices; ++i) {
        int hot = -1;
        for (size_t j = 0; j < cols; ++j) {
            const double v = rows[i * cols + j];
            if (v == 1.0) {
                if (hot >= 0) fail("row has more than one entry set");
                hot = static_cast<int>(j);
            } else if (v != 0.0) {
                fail("row is not one-hot");
            }
        }
        if (hot < 0) fail("row has no entry set");
        t.parent[i] = hot;
    }
    return t;
}

bool validate_topology(const Topology& topo) {
    const int n = topo.n_devices();
    if (n < 1) return false;
    for (int i = 0; i < n; ++i)
        if (topo.parent[i] < 0 || topo.parent[i] > n) return false;
    // Follow the parent chain from every device; with N_d devices a walk that
    // has not hit the sink after N_d hops is trapped in a cycle. Equivalent to
    // checking reachability in the sink-self-looped adjacency matrix.
    for (int i = 0; i < n; ++i) {
        int cur = i;
        int hops = 0;
        while (cur != n && hops <= n) {
            cur = topo.parent[cur];
            ++hops;
        }
        if (cur != n) return false;
    }
    return true;
}

// ===== NetworkInstance ======================================================

void NetworkInstance::rebuild_distances() {
    const int cols = n_devices + 1;
    dist_node.assign(static_cast<size_t>(n_devices) * cols, 0.0);
    for (int i = 0; i < n_devices; ++i) {
        for (int j = 0; j <= n_devices; ++j) {
            // sink sits at the origin
            const double tx = j < n_devices ? device_x[j] : 0.0;
            const double ty = j < n_devices ? device_y[j] : 0.0;
            const double dx = device_x[i] - tx;
            const double dy = device_y[i] - ty;
            dist_node[static_cast<size_t>(i) * cols + j] = std::sqrt(dx * dx + dy * dy);
        }
    }
    dist_beacon.assign(static_cast<size_t>(n_beacons) * n_devices, 0.0);
    for (int b = 0; b < n_beacons; ++b) {
        for (int i = 0; i < n_devices; ++i) {
            const double dx = beacon_x[b] - device_x[i];
            const double dy = beacon_y[b] - device_y[i];
            dist_beacon[static_cast<size_t>(b) * n_devices + i] = std::sqrt(dx * dx + dy * dy);
        }
    }
}

NetworkInstance generate_instance(uint64_t seed, int n_devices, int n_beacons,
                                  const SystemParams& params) {
    if (n_devices < 1) fail("n_devices must be >= 1");
    if (n_beacons < 0) fail("n_beacons must be >= 0");
    params.validate();

    NetworkInstance inst;
    inst.seed = seed;
    inst.n_devices = n_devices;
    inst.n_beacons = n_beacons;
    inst.params = params;

    SplitMix64 rng(seed);
    auto draw_disk = [&](double& x, double& y) {
        const double r = params.radius_km * std::sqrt(rng.uniform());
        const double a = 2.0 * kPi * rng.uniform();
        x = r * std::cos(a);
        y = r * std::sin(a);
    };

    inst.device_x.resize(n_devices);
    inst.device_y.resize(n_devices);
    for (int i = 0; i < n_devices; ++i) draw_disk(inst.device_x[i], inst.device_y[i]);
    inst.beacon_x.resize(n_beacons);
    inst.beacon_y.resize(n_beacons);
    for (int b = 0; b < n_beacons; ++b) draw_disk(inst.beacon_x[b], inst.beacon_y[b]);

    const int cols = n_devices + 1;
    inst.gain_node.assign(static_cast<size_t>(n_devices) * cols, 0.0);
    for (int i = 0; i < n_devices; ++i)
        for (int j = 0; j <= n_devices; ++j)
            if (j != i) inst.gain_node[static_cast<size_t>(i) * cols + j] = rng.exponential();
    inst.gain_beacon.resize(static_cast<size_t>(n_beacons) * n_devices);
    for (size_t k = 0; k < inst.gain_beacon.size(); ++k)
        inst.gain_beacon[k] = rng.exponential();

    inst.rebuild_distances();
    inst.harvested_j = harvested_energy(inst);
    return inst;
}

std::vector<double> harvested_energy(const NetworkInstance& inst) {
    const SystemParams& p = inst.params;
    std::vector<double> e(inst.n_devices, 0.0);
    for (int i = 0; i < inst.n_devices; ++i) {
        double pw = 0.0;
        for (int b = 0; b < inst.n_beacons; ++b) {
            const double g = inst.gain_beacon[static_cast<size_t>(b) * inst.n_devices + i];
            const double d = inst.dist_beacon[static_cast<size_t>(b) * inst.n_devices + i];
            pw += p.pb_power_w * g * pathloss(p, d);
        }
        e[i] = p.conversion_efficiency * p.frame_s * pw;
    }
    return e;
}

double snr(const NetworkInstance& inst, int from_device, int to_node, double slot_t) {
    if (from_device < 0 || from_device >= inst.n_devices) fail("snr: bad transmitter");
    if (to_node < 0 || to_node > inst.n_devices) fail("snr: bad receiver");
    if (!(slot_t > 0)) fail("snr: slot length must be > 0");
    if (to_node == from_device) return 0.0;
    const double tx_power = inst.harvested_j[from_device] / slot_t;
    return tx_power * inst.gain(from_device, to_node) *
           pathloss(inst.params, inst.dist(from_device, to_node)) / inst.params.noise_w();
}

std::vector<double> bits_per_hz(const NetworkInstance& inst, const Topology& topo,
                                const std::vector<double>& slots) {
    const int n = inst.n_devices;
    if (topo.n_devices() != n) fail("bits_per_hz: topology size mismatch");
    if (slots.size() != static_cast<size_t>(n)) fail("bits_per_hz: slots size mismatch");
    std::vector<double> budget(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const int p = topo.parent[k];
        if (p < 0 || p > n) fail("bits_per_hz: parent index out of range");
        const double rate = slots[k] * std::log2(1.0 + snr(inst, k, p, slots[k]));
        budget[k] += rate;
        if (p < n) budget[p] -= rate;  // parent device has to relay this carry
    }
    return budget;
}

// ===== serialization ========================================================

std::string instance_to_text(const NetworkInstance& inst) {
    std::ostringstream out;
    out << "ehrelay-instance v1\n";
    out << "seed " << inst.seed << "\n";
    out << "devices " << inst.n_devices << "\n";
    out << "beacons " << inst.n_beacons << "\n";
    const SystemParams& p = inst.params;
    out << "alpha " << fmt(p.pathloss_exponent) << "\n";
    out << "bandwidth_hz " << fmt(p.bandwidth_hz) << "\n";
    out << "noise_figure_db " << fmt(p.noise_figure_db) << "\n";
    out << "pb_power_w " << fmt(p.pb_power_w) << "\n";
    out << "eta " << fmt(p.conversion_efficiency) << "\n";
    out << "frame_s " << fmt(p.frame_s) << "\n";
    out << "radius_km " << fmt(p.radius_km) << "\n";
    out << "min_distance_km " << fmt(p.min_distance_km) << "\n";
    for (int i = 0; i < inst.n_devices; ++i)
        out << "device " << i << " " << fmt(inst.device_x[i]) << " " << fmt(inst.device_y[i])
            << "\n";
    for (int b = 0; b < inst.n_beacons; ++b)
        out << "beacon " << b << " " << fmt(inst.beacon_x[b]) << " " << fmt(inst.beacon_y[b])
            << "\n";
    const int cols = inst.n_devices + 1;
    for (int i = 0; i < inst.n_devices; ++i) {
        out << "gains " << i;
        for (int j = 0; j < cols; ++j)
            out << " " << fmt(inst.gain_node[static_cast<size_t>(i) * cols + j]);
        out << "\n";
    }
    for (int b = 0; b < inst.n_beacons; ++b) {
        out << "bgains " << b;
        for (int i = 0; i < inst.n_devices; ++i)
            out << " " << fmt(inst.gain_beacon[static_cast<size_t>(b) * inst.n_devices + i]);
        out << "\n";
    }
    out << "energy";
    for (int i = 0; i < inst.n_devices; ++i) out << " " << fmt(inst.harvested_j[i]);
    out << "\n";
    out << "end\n";
    return out.str();
}

namespace {

void parse_fail(int line_no, const std::string& why) {
    throw std::invalid_argument("instance text, line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

NetworkInstance instance_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) parse_fail(line_no, std::string("missing ") + what);
        ++line_no;
        return std::istringstream(line);
    };
    auto expect_tag = [&](std::istringstream& ls, const char* tag) {
        std::string got;
        ls >> got;
        if (got != tag) parse_fail(line_no, std::string("expected '") + tag + "', got '" + got + "'");
    };
    auto read_double = [&](std::istringstream& ls, const char* what) {
        double v;
        if (!(ls >> v)) parse_fail(line_no, std::string("bad value for ") + what);
        return v;
    };

    {
        auto ls = next_line("header");
        std::string magic, version;
        ls >> magic >> version;
        if (magic != "ehrelay-instance" || version != "v1")
            parse_fail(line_no, "not an ehrelay-instance v1 file");
    }

    NetworkInstance inst;
    {
        auto ls = next_line("seed");
        expect_tag(ls, "seed");
        if (!(ls >> inst.seed)) parse_fail(line_no, "bad seed");
    }
    {
        auto ls = next_line("devices");
        expect_tag(ls, "devices");
        if (!(ls >> inst.n_devices) || inst.n_devices < 1) parse_fail(line_no, "bad device count");
    }
    {
        auto ls = next_line("beacons");
        expect_tag(ls, "beacons");
        if (!(ls >> inst.n_beacons) || inst.n_beacons < 0) parse_fail(line_no, "bad beacon count");
    }
    SystemParams& p = inst.params;
    const struct {
        const char* tag;
        double* dst;
    } fields[] = {
        {"alpha", &p.pathloss_exponent},
        {"bandwidth_hz", &p.bandwidth_hz},
        {"noise_figure_db", &p.noise_figure_db},
        {"pb_power_w", &p.pb_power_w},
        {"eta", &p.conversion_efficiency},
        {"frame_s", &p.frame_s},
        {"radius_km", &p.radius_km},
        {"min_distance_km", &p.min_distance_km},
    };
    for (const auto& f : fields) {
        auto ls = next_line(f.tag);
        expect_tag(ls, f.tag);
        *f.dst = read_double(ls, f.tag);
    }
    p.validate();

    inst.device_x.resize(inst.n_devices);
    inst.device_y.resize(inst.n_devices);
    for (int i = 0; i < inst.n_devices; ++i) {
        auto ls = next_line("device line");
        expect_tag(ls, "device");
        int idx;
        if (!(ls >> idx) || idx != i) parse_fail(line_no, "device lines out of order");
        inst.device_x[i] = read_double(ls, "device x");
        inst.device_y[i] = read_double(ls, "device y");
    }
    inst.beacon_x.resize(inst.n_beacons);
    inst.beacon_y.resize(inst.n_beacons);
    for (int b = 0; b < inst.n_beacons; ++b) {
        auto ls = next_line("beacon line");
        expect_tag(ls, "beacon");
        int idx;
        if (!(ls >> idx) || idx != b) parse_fail(line_no, "beacon lines out of order");
        inst.beacon_x[b] = read_double(ls, "beacon x");
        inst.beacon_y[b] = read_double(ls, "beacon y");
    }
    const int cols = inst.n_devices + 1;
    inst.gain_node.resize(static_cast<size_t>(inst.n_devices) * cols);
    for (int i = 0; i < inst.n_devices; ++i) {
        auto ls = next_line("gains line");
        expect_tag(ls, "gains");
        int idx;
        if (!(ls >> idx) || idx != i) parse_fail(line_no, "gains lines out of order");
        for (int j = 0; j < cols; ++j)
            inst.gain_node[static_cast<size_t>(i) * cols + j] = read_double(ls, "gain");
        if (inst.gain_node[static_cast<size_t>(i) * cols + i] != 0.0)
            parse_fail(line_no, "self gain must be 0");
    }
    inst.gain_beacon.resize(static_cast<size_t>(inst.n_beacons) * inst.n_devices);
    for (int b = 0; b < inst.n_beacons; ++b) {
        auto ls = next_line("bgains line");
        expect_tag(ls, "bgains");
        int idx;
        if (!(ls >> idx) || idx != b) parse_fail(line_no, "bgains lines out of order");
        for (int i = 0; i < inst.n_devices; ++i)
            inst.gain_beacon[static_cast<size_t>(b) * inst.n_devices + i] =
                read_double(ls, "beacon gain");
    }
    inst.harvested_j.resize(inst.n_devices);
    {
        auto ls = next_line("energy");
        expect_tag(ls, "energy");
        for (int i = 0; i < inst.n_devices; ++i)
            inst.harvested_j[i] = read_double(ls, "energy");
    }
    {
        auto ls = next_line("end");
        expect_tag(ls, "end");
    }

    inst.rebuild_distances();
    return inst;
}

void save_instance(const NetworkInstance& inst, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << instance_to_text(inst);
    if (!out.flush()) throw IoError("write failed: " + path);
}

NetworkInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return instance_from_text(buf.str());
}

}  // namespace ehrelay
