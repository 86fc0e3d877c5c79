#include "core/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "core/baselines.hpp"
#include "core/rng.hpp"
#include "core/textio.hpp"

namespace ehrelay {

namespace {

constexpr uint64_t kGreedyStream = 11;
constexpr uint64_t kTrainStream = 12;

const char* const kCsvHeader =
    "scheme,n_devices,n_beacons,pb_power_w,seed,min_bits_per_hz,max_bits_per_hz,"
    "wall_time_s,epochs,valid";

bool known_scheme(const std::string& s) {
    return s == "direct" || s == "mst" || s == "greedy" || s == "opt" || s == "proposed";
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

// ===== config ===============================================================

void ExperimentConfig::validate() const {
    if (schemes.empty()) throw std::invalid_argument("config: schemes must not be empty");
    for (const auto& s : schemes)
        if (!known_scheme(s)) throw std::invalid_argument("config: unknown scheme '" + s + "'");
    if (n_devices.empty() || n_beacons.empty() || pb_power_w.empty())
        throw std::invalid_argument("config: sweep axes must not be empty");
    for (const int nd : n_devices) {
        if (nd < 1) throw std::invalid_argument("config: n_devices must be >= 1");
        for (const auto& s : schemes)
            if (s == "opt" && nd > 8)
                throw std::invalid_argument(
                    "config: scheme 'opt' cannot run above 8 devices (exhaustive search)");
    }
    for (const int nb : n_beacons)
        if (nb < 0) throw std::invalid_argument("config: n_beacons must be >= 0");
    for (const double p : pb_power_w)
        if (!(p > 0)) throw std::invalid_argument("config: pb_power_w must be > 0");
    if (seeds_per_cell < 1) throw std::invalid_argument("config: seeds_per_cell must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("config: max_epochs must be >= 1");
    params.validate();
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    auto bad = [&](const std::string& why) {
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + why);
    };
    auto to_int = [&](const std::string& s) {
        try {
            size_t used;
            const int v = std::stoi(s, &used);
            if (used != s.size()) bad("trailing characters in integer '" + s + "'");
            return v;
        } catch (const std::invalid_argument&) {
            bad("bad integer '" + s + "'");
        } catch (const std::out_of_range&) {
            bad("integer out of range '" + s + "'");
        }
        return 0;
    };
    auto to_double = [&](const std::string& s) {
        try {
            size_t used;
            const double v = std::stod(s, &used);
            if (used != s.size()) bad("trailing characters in number '" + s + "'");
            return v;
        } catch (const std::invalid_argument&) {
            bad("bad number '" + s + "'");
        } catch (const std::out_of_range&) {
            bad("number out of range '" + s + "'");
        }
        return 0.0;
    };

    while (std::getline(in, raw)) {
        ++line_no;
        const size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) bad("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) bad("empty value for '" + key + "'");

        auto int_list = [&] {
            std::vector<int> out;
            for (const auto& part : split(value, ',')) out.push_back(to_int(trim(part)));
            return out;
        };
        auto double_list = [&] {
            std::vector<double> out;
            for (const auto& part : split(value, ',')) out.push_back(to_double(trim(part)));
            return out;
        };

        if (key == "schemes") {
            cfg.schemes.clear();
            for (const auto& part : split(value, ',')) cfg.schemes.push_back(trim(part));
        } else if (key == "n_devices") {
            cfg.n_devices = int_list();
        } else if (key == "n_beacons") {
            cfg.n_beacons = int_list();
        } else if (key == "pb_power_w") {
            cfg.pb_power_w = double_list();
        } else if (key == "seeds_per_cell") {
            cfg.seeds_per_cell = to_int(value);
        } else if (key == "base_seed") {
            cfg.base_seed = std::stoull(value);
        } else if (key == "alpha") {
            cfg.params.pathloss_exponent = to_double(value);
        } else if (key == "bandwidth_hz") {
            cfg.params.bandwidth_hz = to_double(value);
        } else if (key == "noise_figure_db") {
            cfg.params.noise_figure_db = to_double(value);
        } else if (key == "eta") {
            cfg.params.conversion_efficiency = to_double(value);
        } else if (key == "frame_s") {
            cfg.params.frame_s = to_double(value);
        } else if (key == "radius_km") {
            cfg.params.radius_km = to_double(value);
        } else if (key == "min_distance_km") {
            cfg.params.min_distance_km = to_double(value);
        } else if (key == "ib_eps1") {
            cfg.ib.eps1 = to_double(value);
        } else if (key == "ib_eps2") {
            cfg.ib.eps2 = to_double(value);
        } else if (key == "ib_max_outer") {
            cfg.ib.max_outer_iterations = to_int(value);
        } else if (key == "pt_slot_scale") {
            cfg.pt.slot_scale = to_double(value);
        } else if (key == "pt_budget_threshold") {
            cfg.pt.budget_threshold = to_double(value);
        } else if (key == "pt_include_fading") {
            cfg.pt.include_fading = to_int(value) != 0;
        } else if (key == "adam_learning_rate") {
            cfg.adam.learning_rate = to_double(value);
        } else if (key == "adam_beta1") {
            cfg.adam.beta1 = to_double(value);
        } else if (key == "adam_beta2") {
            cfg.adam.beta2 = to_double(value);
        } else if (key == "adam_epsilon") {
            cfg.adam.epsilon = to_double(value);
        } else if (key == "max_epochs") {
            cfg.max_epochs = to_int(value);
        } else if (key == "patience") {
            cfg.patience = to_int(value);
        } else if (key == "out_csv") {
            cfg.out_csv = value;
        } else if (key == "workers") {
            cfg.workers = to_int(value);
        } else {
            bad("unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

// ===== sweep ================================================================

uint64_t cell_seed(uint64_t base_seed, int n_devices, int n_beacons, double pb_power_w,
                   int replicate) {
    uint64_t h = mix_seed(base_seed, static_cast<uint64_t>(n_devices));
    h = mix_seed(h, static_cast<uint64_t>(n_beacons));
    h = mix_seed(h, pb_power_w);
    return mix_seed(h, static_cast<uint64_t>(replicate));
}

SolveOutcome solve_scheme(const NetworkInstance& inst, const std::string& scheme,
                          uint64_t scheme_seed, const IbConfig& ib, const PtConfig& pt,
                          const AdamConfig& adam, int max_epochs, int patience) {
    SolveOutcome out;
    if (scheme == "direct") {
        out.topology = direct_topology(inst.n_devices);
        out.allocation = allocate(inst, out.topology, ib);
    } else if (scheme == "mst") {
        out.topology = mst_topology(inst);
        out.allocation = allocate(inst, out.topology, ib);
    } else if (scheme == "greedy") {
        out.topology = greedy_topology(inst, scheme_seed);
        out.allocation = allocate(inst, out.topology, ib);
    } else if (scheme == "opt") {
        OptimalResult best = optimal_topology(inst, ib);
        out.topology = std::move(best.topology);
        out.allocation = std::move(best.allocation);
    } else if (scheme == "proposed") {
        TrainConfig tc;
        tc.seed = scheme_seed;
        tc.max_epochs = max_epochs;
        tc.patience = patience;
        ProposeResult prop = propose_topology(inst, tc, pt, adam, ib);
        out.topology = std::move(prop.topology);
        out.allocation = std::move(prop.allocation);
        out.used_fallback = prop.used_fallback;
        out.epochs = prop.epochs_run;
    } else {
        throw std::invalid_argument("unknown scheme '" + scheme + "'");
    }
    out.valid = validate_topology(out.topology);
    return out;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    struct Task {
        int nd, nb, replicate;
        double pb;
        uint64_t seed;
        size_t first_row;
    };
    std::vector<Task> tasks;
    for (const int nd : cfg.n_devices)
        for (const int nb : cfg.n_beacons)
            for (const double pb : cfg.pb_power_w)
                for (int rep = 0; rep < cfg.seeds_per_cell; ++rep)
                    tasks.push_back({nd, nb, rep, pb,
                                     cell_seed(cfg.base_seed, nd, nb, pb, rep),
                                     tasks.size() * cfg.schemes.size()});

    std::vector<ResultRow> rows(tasks.size() * cfg.schemes.size());

    auto run_task = [&](const Task& task) {
        SystemParams params = cfg.params;
        params.pb_power_w = task.pb;
        NetworkInstance inst;
        bool inst_ok = true;
        try {
            inst = generate_instance(task.seed, task.nd, task.nb, params);
        } catch (const std::exception&) {
            inst_ok = false;
        }
        for (size_t s = 0; s < cfg.schemes.size(); ++s) {
            ResultRow& row = rows[task.first_row + s];
            row.scheme = cfg.schemes[s];
            row.n_devices = task.nd;
            row.n_beacons = task.nb;
            row.pb_power_w = task.pb;
            row.seed = task.seed;
            const uint64_t scheme_seed =
                mix_seed(task.seed, row.scheme == "proposed" ? kTrainStream : kGreedyStream);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                if (!inst_ok) throw std::runtime_error("instance generation failed");
                const SolveOutcome outcome = solve_scheme(inst, row.scheme, scheme_seed, cfg.ib,
                                                          cfg.pt, cfg.adam, cfg.max_epochs,
                                                          cfg.patience);
                row.min_bits_per_hz = outcome.allocation.b_ib;
                row.max_bits_per_hz = outcome.allocation.b_max;
                row.epochs = outcome.epochs;
                row.valid = outcome.valid;
            } catch (const std::exception&) {
                // Error row: keep the sweep going, make the failure visible.
                row.min_bits_per_hz = std::numeric_limits<double>::quiet_NaN();
                row.max_bits_per_hz = std::numeric_limits<double>::quiet_NaN();
                row.epochs = 0;
                row.valid = false;
            }
            row.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };

    size_t n_workers = cfg.workers > 0 ? static_cast<size_t>(cfg.workers)
                                       : std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min(n_workers, tasks.size());
    if (n_workers <= 1) {
        for (const Task& t : tasks) run_task(t);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (size_t w = 0; w < n_workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
                    run_task(tasks[i]);
            });
        for (std::thread& t : pool) t.join();
    }
    return rows;
}

// ===== CSV ==================================================================

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    char wall[32];
    for (const ResultRow& r : rows) {
        std::snprintf(wall, sizeof wall, "%.6f", r.wall_time_s);
        out << r.scheme << "," << r.n_devices << "," << r.n_beacons << ","
            << fmt_double(r.pb_power_w) << "," << r.seed << "," << fmt_double(r.min_bits_per_hz)
            << "," << fmt_double(r.max_bits_per_hz) << "," << wall << "," << r.epochs << ","
            << (r.valid ? 1 : 0) << "\n";
    }
    return out.str();
}

std::vector<ResultRow> rows_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader)
        throw std::invalid_argument("results csv: missing or unexpected header");
    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        if (f.size() != 10)
            throw std::invalid_argument("results csv line " + std::to_string(line_no) +
                                        ": expected 10 fields");
        ResultRow r;
        r.scheme = f[0];
        r.n_devices = std::stoi(f[1]);
        r.n_beacons = std::stoi(f[2]);
        r.pb_power_w = std::stod(f[3]);
        r.seed = std::stoull(f[4]);
        r.min_bits_per_hz = std::stod(f[5]);
        r.max_bits_per_hz = std::stod(f[6]);
        r.wall_time_s = std::stod(f[7]);
        r.epochs = std::stoi(f[8]);
        r.valid = std::stoi(f[9]) != 0;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string training_curves_csv(const TrainResult& result) {
    std::ostringstream out;
    out << "epoch,loss,running_min_loss,b_min\n";
    for (int e = 0; e < result.epochs_run; ++e)
        out << e << "," << fmt_double(result.loss_history[e]) << ","
            << fmt_double(result.running_min_history[e]) << ","
            << fmt_double(result.b_min_history[e]) << "\n";
    return out.str();
}

}  // namespace ehrelay
