// ehrelay command line. Talks to the library strictly through the public C
// API so it doubles as a usage example for other bindings.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ehrelay.h"

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Relative output paths land under EHRELAY_OUTDIR when it is set.
std::string resolve_out(const std::string& path) {
    const char* outdir = std::getenv("EHRELAY_OUTDIR");
    if (!outdir || !*outdir || path.empty() || path.front() == '/') return path;
    std::string full = outdir;
    if (full.back() != '/') full += '/';
    return full + path;
}

int env_workers() {
    const char* w = std::getenv("EHRELAY_WORKERS");
    return w && *w ? std::atoi(w) : 0;
}

[[noreturn]] void die(ehr_status status) {
    std::cerr << "error: " << ehr_last_error() << "\n";
    std::exit(static_cast<int>(status));
}

void check(ehr_status status) {
    if (status != EHR_OK) die(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open: " << path << "\n";
        std::exit(static_cast<int>(EHR_ERR_IO));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text).flush()) {
        std::cerr << "error: cannot write: " << path << "\n";
        std::exit(static_cast<int>(EHR_ERR_IO));
    }
}

struct InstanceHandle {
    ehr_instance* ptr = nullptr;
    ~InstanceHandle() { ehr_instance_free(ptr); }
};

struct SolutionHandle {
    ehr_solution* ptr = nullptr;
    ~SolutionHandle() { ehr_solution_free(ptr); }
};

struct TrainingHandle {
    ehr_training* ptr = nullptr;
    ~TrainingHandle() { ehr_training_free(ptr); }
};

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { ehr_string_free(ptr); }
};

void print_solution(const ehr_solution* sol, const char* scheme) {
    const int n = [&] {
        int i = 0;
        while (ehr_solution_parent(sol, i) >= 0) ++i;
        return i;
    }();
    std::cout << "scheme: " << scheme << "\n";
    std::cout << "devices: " << n << "\n";
    std::cout << "min_bits_per_hz: " << fmt17(ehr_solution_min_bits(sol)) << "\n";
    std::cout << "max_bits_per_hz: " << fmt17(ehr_solution_max_bits(sol)) << "\n";
    std::cout << "valid: " << ehr_solution_valid(sol) << "\n";
    std::cout << "fallback: " << ehr_solution_used_fallback(sol) << "\n";
    std::cout << "epochs: " << ehr_solution_epochs(sol) << "\n";
    std::cout << "parents:";
    for (int i = 0; i < n; ++i) std::cout << " " << ehr_solution_parent(sol, i);
    std::cout << "\n";
    std::cout << "slots_s:";
    for (int i = 0; i < n; ++i) std::cout << " " << fmt17(ehr_solution_slot(sol, i));
    std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relay-topology planning for energy-harvesting TDMA networks"};
    app.require_subcommand(1);

    ehr_params params;
    ehr_params_default(&params);
    ehr_options opts;
    ehr_options_default(&opts);

    // Shared physics flags, attached to the subcommands that sample networks.
    auto add_param_flags = [&](CLI::App* cmd) {
        cmd->add_option("--alpha", params.pathloss_exponent, "path-loss exponent");
        cmd->add_option("--bandwidth-hz", params.bandwidth_hz, "channel bandwidth (Hz)");
        cmd->add_option("--noise-figure-db", params.noise_figure_db, "receiver noise figure (dB)");
        cmd->add_option("--pb-power", params.pb_power_w, "beacon transmit power (W)");
        cmd->add_option("--eta", params.conversion_efficiency, "RF-to-DC conversion efficiency");
        cmd->add_option("--frame", params.frame_s, "TDMA frame length (s)");
        cmd->add_option("--radius", params.radius_km, "cell radius (km)");
        cmd->add_option("--min-distance", params.min_distance_km, "link distance clamp (km)");
    };
    auto add_solver_flags = [&](CLI::App* cmd) {
        cmd->add_option("--ib-eps1", opts.ib_eps1, "balance gap target (bits/Hz)");
        cmd->add_option("--ib-eps2", opts.ib_eps2, "slot floor (s)");
        cmd->add_option("--pt-slot-scale", opts.pt_slot_scale, "walk slot length (s)");
        cmd->add_option("--pt-threshold", opts.pt_budget_threshold, "subtree expansion threshold");
        cmd->add_flag("--pt-fading", opts.pt_include_fading, "price links with fading");
        cmd->add_option("--learning-rate", opts.adam_learning_rate, "optimizer step size");
        cmd->add_option("--max-epochs", opts.max_epochs, "training epoch cap");
        cmd->add_option("--patience", opts.patience, "epochs without a new best before stopping");
        cmd->add_option("--extra-epochs", opts.extra_epochs, "epochs to train past the stop");
        cmd->add_option("--seed", opts.seed, "scheme seed (greedy order / training streams)");
    };

    // generate
    auto* gen = app.add_subcommand("generate", "sample a network instance to a file");
    uint64_t gen_seed = 1;
    int gen_devices = 5, gen_beacons = 2;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "instance seed");
    gen->add_option("--devices,-n", gen_devices, "device count")->required();
    gen->add_option("--beacons,-b", gen_beacons, "beacon count");
    gen->add_option("--out,-o", gen_out, "output instance file")->required();
    add_param_flags(gen);

    // solve
    auto* solve = app.add_subcommand("solve", "plan a topology for a saved instance");
    std::string solve_instance, solve_scheme, solve_out, solve_dot;
    solve->add_option("--instance,-i", solve_instance, "instance file")->required();
    solve->add_option("--scheme,-s", solve_scheme, "direct|mst|greedy|opt|proposed")->required();
    solve->add_option("--out,-o", solve_out, "write the solution file here");
    solve->add_option("--dot", solve_dot, "write a Graphviz rendering here");
    add_solver_flags(solve);

    // train
    auto* train = app.add_subcommand("train", "train the topology generator on an instance");
    std::string train_instance, train_curves, train_checkpoint, train_solution;
    train->add_option("--instance,-i", train_instance, "instance file")->required();
    train->add_option("--curves", train_curves, "write per-epoch curves CSV here");
    train->add_option("--checkpoint", train_checkpoint, "write the final model state here");
    train->add_option("--solution", train_solution, "write the hardened champion solution here");
    add_solver_flags(train);

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark sweep to CSV");
    std::string bench_config, bench_out;
    std::vector<std::string> bench_set;
    int bench_workers = 0;
    bench->add_option("--config,-c", bench_config, "sweep config file (key = value lines)");
    bench->add_option("--set", bench_set, "extra config line, e.g. --set seeds_per_cell=5");
    bench->add_option("--out,-o", bench_out, "CSV output file (stdout when omitted)");
    bench->add_option("--workers,-j", bench_workers, "worker threads (default: EHRELAY_WORKERS)");

    // export-dot
    auto* dot = app.add_subcommand("export-dot", "solve and render a topology as Graphviz");
    std::string dot_instance, dot_scheme = "direct", dot_out;
    dot->add_option("--instance,-i", dot_instance, "instance file")->required();
    dot->add_option("--scheme,-s", dot_scheme, "direct|mst|greedy|opt|proposed");
    dot->add_option("--out,-o", dot_out, "output .dot file")->required();
    add_solver_flags(dot);

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        InstanceHandle inst;
        check(ehr_instance_generate(gen_seed, gen_devices, gen_beacons, &params, &inst.ptr));
        check(ehr_instance_save(inst.ptr, resolve_out(gen_out).c_str()));
        std::cout << "wrote " << resolve_out(gen_out) << " (devices=" << gen_devices
                  << " beacons=" << gen_beacons << " seed=" << gen_seed << ")\n";
        return 0;
    }

    if (solve->parsed()) {
        InstanceHandle inst;
        check(ehr_instance_load(solve_instance.c_str(), &inst.ptr));
        SolutionHandle sol;
        check(ehr_solve(inst.ptr, solve_scheme.c_str(), &opts, &sol.ptr));
        print_solution(sol.ptr, solve_scheme.c_str());
        if (!solve_out.empty())
            check(ehr_solution_save(sol.ptr, resolve_out(solve_out).c_str()));
        if (!solve_dot.empty()) {
            OwnedString text;
            check(ehr_solution_dot(inst.ptr, sol.ptr, &text.ptr));
            write_file(resolve_out(solve_dot), text.ptr);
        }
        return 0;
    }

    if (train->parsed()) {
        InstanceHandle inst;
        check(ehr_instance_load(train_instance.c_str(), &inst.ptr));
        TrainingHandle tr;
        check(ehr_train(inst.ptr, &opts, &tr.ptr));
        const int epochs = ehr_training_epochs(tr.ptr);
        double final_min = 0.0;
        check(ehr_training_curve(tr.ptr, epochs - 1, nullptr, &final_min, nullptr));
        std::cout << "epochs: " << epochs << "\n";
        std::cout << "stop_epoch: " << ehr_training_stop_epoch(tr.ptr) << "\n";
        std::cout << "best_loss: " << fmt17(final_min) << "\n";
        if (!train_curves.empty()) {
            OwnedString csv;
            check(ehr_training_curves_csv(tr.ptr, &csv.ptr));
            write_file(resolve_out(train_curves), csv.ptr);
        }
        if (!train_checkpoint.empty())
            check(ehr_training_save_checkpoint(tr.ptr, resolve_out(train_checkpoint).c_str()));
        if (!train_solution.empty()) {
            SolutionHandle sol;
            check(ehr_training_solution(tr.ptr, inst.ptr, &opts, &sol.ptr));
            check(ehr_solution_save(sol.ptr, resolve_out(train_solution).c_str()));
        }
        return 0;
    }

    if (bench->parsed()) {
        std::string config_text;
        if (!bench_config.empty()) config_text = read_file(bench_config);
        for (const std::string& line : bench_set) config_text += "\n" + line;
        const int workers = bench_workers > 0 ? bench_workers : env_workers();
        if (!bench_out.empty()) {
            check(ehr_bench_run_to_file(config_text.c_str(), workers,
                                        resolve_out(bench_out).c_str()));
            std::cout << "wrote " << resolve_out(bench_out) << "\n";
        } else {
            OwnedString csv;
            check(ehr_bench_run(config_text.c_str(), workers, &csv.ptr));
            std::cout << csv.ptr;
        }
        return 0;
    }

    if (dot->parsed()) {
        InstanceHandle inst;
        check(ehr_instance_load(dot_instance.c_str(), &inst.ptr));
        SolutionHandle sol;
        check(ehr_solve(inst.ptr, dot_scheme.c_str(), &opts, &sol.ptr));
        OwnedString text;
        check(ehr_solution_dot(inst.ptr, sol.ptr, &text.ptr));
        write_file(resolve_out(dot_out), text.ptr);
        std::cout << "wrote " << resolve_out(dot_out) << "\n";
        return 0;
    }

    return 0;
}
