#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/generator.hpp"
#include "core/ib_allocator.hpp"
#include "core/pt_evm.hpp"
#include "core/system_model.hpp"

namespace ehrelay {

// A benchmark sweep: the cross product of device counts, beacon counts and
// beacon powers, replicated over seeds_per_cell instances, each solved by
// every scheme in `schemes`.
struct ExperimentConfig {
    std::vector<std::string> schemes{"direct", "mst", "greedy", "proposed"};
    std::vector<int> n_devices{5};
    std::vector<int> n_beacons{2};
    std::vector<double> pb_power_w{1.0};
    int seeds_per_cell = 10;
    uint64_t base_seed = 1;

    SystemParams params;  // pb_power_w is overridden per cell
    IbConfig ib;
    PtConfig pt;
    AdamConfig adam;
    int max_epochs = 2000;
    int patience = 0;  // <= 0: trainer default

    std::string out_csv;  // optional; callers may also take the CSV as a string
    int workers = 0;      // <= 0: hardware concurrency

    void validate() const;  // throws std::invalid_argument
};

// key = value lines; '#' starts a comment. Lists are comma separated.
// Unknown keys are an error. Later lines override earlier ones.
ExperimentConfig parse_experiment_config(const std::string& text);

struct ResultRow {
    std::string scheme;
    int n_devices = 0;
    int n_beacons = 0;
    double pb_power_w = 0.0;
    uint64_t seed = 0;          // derived per-replicate instance seed
    double min_bits_per_hz = 0.0;
    double max_bits_per_hz = 0.0;
    double wall_time_s = 0.0;   // the one column excluded from determinism
    int epochs = 0;             // 0 for schemes that do not train
    bool valid = false;         // false also marks error rows (metrics = nan)
};

// Instance seed for one sweep cell replicate; exposed so external tooling can
// regenerate the exact instances a CSV row refers to.
uint64_t cell_seed(uint64_t base_seed, int n_devices, int n_beacons, double pb_power_w,
                   int replicate);

// One scheme applied to one instance. `scheme` is one of direct, mst,
// greedy, opt, proposed; `scheme_seed` feeds the seeded schemes (greedy
// shuffle order, proposed training) and is ignored by the rest.
struct SolveOutcome {
    Topology topology;
    IbResult allocation;
    bool valid = false;
    bool used_fallback = false;
    int epochs = 0;
};
SolveOutcome solve_scheme(const NetworkInstance& inst, const std::string& scheme,
                          uint64_t scheme_seed, const IbConfig& ib, const PtConfig& pt,
                          const AdamConfig& adam, int max_epochs, int patience);

// Runs the sweep, cells fanned out over worker threads. Row order is fixed
// (cells in declaration order, replicates inside, schemes innermost) no
// matter how many workers run. A scheme failure turns into an error row
// rather than aborting the sweep.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> rows_from_csv(const std::string& text);

// epoch,loss,running_min_loss,b_min per trained epoch; plot-ready.
std::string training_curves_csv(const TrainResult& result);

}  // namespace ehrelay
