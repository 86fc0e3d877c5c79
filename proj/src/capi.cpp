// C boundary: every entry point validates handles, catches everything and
// turns it into a status code plus a thread-local message.

#include "ehrelay.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "core/baselines.hpp"
#include "core/dot_export.hpp"
#include "core/experiment.hpp"
#include "core/generator.hpp"
#include "core/ib_allocator.hpp"
#include "core/system_model.hpp"
#include "core/textio.hpp"

using namespace ehrelay;

struct ehr_instance {
    NetworkInstance inst;
};

struct ehr_solution {
    std::string scheme;
    Topology topology;
    IbResult allocation;
    bool valid = false;
    bool used_fallback = false;
    int epochs = 0;
};

struct ehr_training {
    int n_devices = 0;
    TrainResult result;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

ehr_status failure(ehr_status code, const std::string& msg) {
    set_error(msg);
    return code;
}

// Runs `fn` under the standard exception-to-status mapping.
template <typename Fn>
ehr_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return EHR_OK;
    } catch (const IoError& e) {
        return failure(EHR_ERR_IO, e.what());
    } catch (const BalanceCapError& e) {
        return failure(EHR_ERR_NO_CONVERGE, e.what());
    } catch (const std::invalid_argument& e) {
        return failure(EHR_ERR_INVALID_ARG, e.what());
    } catch (const std::domain_error& e) {
        return failure(EHR_ERR_INVALID_ARG, e.what());
    } catch (const std::bad_alloc&) {
        return failure(EHR_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return failure(EHR_ERR_INTERNAL, e.what());
    } catch (...) {
        return failure(EHR_ERR_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

SystemParams to_params(const ehr_params* p) {
    SystemParams out;
    if (p) {
        out.pathloss_exponent = p->pathloss_exponent;
        out.bandwidth_hz = p->bandwidth_hz;
        out.noise_figure_db = p->noise_figure_db;
        out.pb_power_w = p->pb_power_w;
        out.conversion_efficiency = p->conversion_efficiency;
        out.frame_s = p->frame_s;
        out.radius_km = p->radius_km;
        out.min_distance_km = p->min_distance_km;
    }
    return out;
}

struct OptionSet {
    IbConfig ib;
    PtConfig pt;
    AdamConfig adam;
    TrainConfig train;
};

OptionSet to_options(const ehr_options* o) {
    OptionSet s;
    if (!o) return s;
    s.ib.eps1 = o->ib_eps1;
    s.ib.eps2 = o->ib_eps2;
    s.ib.max_outer_iterations = o->ib_max_outer;
    s.pt.slot_scale = o->pt_slot_scale;
    s.pt.budget_threshold = o->pt_budget_threshold;
    s.pt.include_fading = o->pt_include_fading != 0;
    s.adam.learning_rate = o->adam_learning_rate;
    s.adam.beta1 = o->adam_beta1;
    s.adam.beta2 = o->adam_beta2;
    s.adam.epsilon = o->adam_epsilon;
    s.train.seed = o->seed;
    s.train.max_epochs = o->max_epochs;
    s.train.patience = o->patience;
    s.train.extra_epochs = o->extra_epochs;
    return s;
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::string solution_to_text(const ehr_solution& sol) {
    std::string out = "ehrelay-solution v1\n";
    out += "scheme " + sol.scheme + "\n";
    out += "devices " + std::to_string(sol.topology.n_devices()) + "\n";
    out += "min_bits_per_hz " + fmt_double(sol.allocation.b_ib) + "\n";
    out += "max_bits_per_hz " + fmt_double(sol.allocation.b_max) + "\n";
    out += std::string("valid ") + (sol.valid ? "1" : "0") + "\n";
    out += std::string("fallback ") + (sol.used_fallback ? "1" : "0") + "\n";
    out += "epochs " + std::to_string(sol.epochs) + "\n";
    for (int i = 0; i < sol.topology.n_devices(); ++i)
        out += "parent " + std::to_string(i) + " " + std::to_string(sol.topology.parent[i]) + "\n";
    for (int i = 0; i < sol.topology.n_devices(); ++i)
        out += "slot " + std::to_string(i) + " " + fmt_double(sol.allocation.slots.t[i]) + "\n";
    out += "end\n";
    return out;
}

}  // namespace

extern "C" {

const char* ehr_version(void) { return "1.0.0"; }

const char* ehr_last_error(void) { return g_last_error.c_str(); }

void ehr_string_free(char* s) { std::free(s); }

void ehr_params_default(ehr_params* p) {
    if (!p) return;
    const SystemParams d;
    p->pathloss_exponent = d.pathloss_exponent;
    p->bandwidth_hz = d.bandwidth_hz;
    p->noise_figure_db = d.noise_figure_db;
    p->pb_power_w = d.pb_power_w;
    p->conversion_efficiency = d.conversion_efficiency;
    p->frame_s = d.frame_s;
    p->radius_km = d.radius_km;
    p->min_distance_km = d.min_distance_km;
}

void ehr_options_default(ehr_options* o) {
    if (!o) return;
    const IbConfig ib;
    const PtConfig pt;
    const AdamConfig adam;
    const TrainConfig tc;
    o->ib_eps1 = ib.eps1;
    o->ib_eps2 = ib.eps2;
    o->ib_max_outer = ib.max_outer_iterations;
    o->pt_slot_scale = pt.slot_scale;
    o->pt_budget_threshold = pt.budget_threshold;
    o->pt_include_fading = pt.include_fading ? 1 : 0;
    o->adam_learning_rate = adam.learning_rate;
    o->adam_beta1 = adam.beta1;
    o->adam_beta2 = adam.beta2;
    o->adam_epsilon = adam.epsilon;
    o->max_epochs = tc.max_epochs;
    o->patience = tc.patience;
    o->extra_epochs = tc.extra_epochs;
    o->seed = tc.seed;
}

/* ----- instances ----------------------------------------------------------*/

ehr_status ehr_instance_generate(uint64_t seed, int n_devices, int n_beacons,
                                 const ehr_params* params, ehr_instance** out) {
    return guarded([&] {
        require(out != nullptr, "out must not be null");
        auto handle = std::make_unique<ehr_instance>();
        handle->inst = generate_instance(seed, n_devices, n_beacons, to_params(params));
        *out = handle.release();
    });
}

ehr_status ehr_instance_save(const ehr_instance* inst, const char* path) {
    return guarded([&] {
        require(inst != nullptr, "instance must not be null");
        require(path != nullptr, "path must not be null");
        save_instance(inst->inst, path);
    });
}

ehr_status ehr_instance_load(const char* path, ehr_instance** out) {
    return guarded([&] {
        require(path != nullptr, "path must not be null");
        require(out != nullptr, "out must not be null");
        auto handle = std::make_unique<ehr_instance>();
        handle->inst = load_instance(path);
        *out = handle.release();
    });
}

ehr_status ehr_instance_to_string(const ehr_instance* inst, char** out) {
    return guarded([&] {
        require(inst != nullptr, "instance must not be null");
        require(out != nullptr, "out must not be null");
        *out = dup_string(instance_to_text(inst->inst));
    });
}

int ehr_instance_devices(const ehr_instance* inst) { return inst ? inst->inst.n_devices : -1; }

int ehr_instance_beacons(const ehr_instance* inst) { return inst ? inst->inst.n_beacons : -1; }

uint64_t ehr_instance_seed(const ehr_instance* inst) { return inst ? inst->inst.seed : 0; }

ehr_status ehr_instance_energy(const ehr_instance* inst, int device, double* out_joules) {
    return guarded([&] {
        require(inst != nullptr, "instance must not be null");
        require(out_joules != nullptr, "out must not be null");
        require(device >= 0 && device < inst->inst.n_devices, "device index out of range");
        *out_joules = inst->inst.harvested_j[device];
    });
}

void ehr_instance_free(ehr_instance* inst) { delete inst; }

/* ----- solving ------------------------------------------------------------*/

ehr_status ehr_solve(const ehr_instance* inst, const char* scheme, const ehr_options* opts,
                     ehr_solution** out) {
    return guarded([&] {
        require(inst != nullptr, "instance must not be null");
        require(scheme != nullptr, "scheme must not be null");
        require(out != nullptr, "out must not be null");
        const OptionSet o = to_options(opts);
        const SolveOutcome outcome =
            solve_scheme(inst->inst, scheme, o.train.seed, o.ib, o.pt, o.adam,
                         o.train.max_epochs, o.train.patience);
        auto handle = std::make_unique<ehr_solution>();
        handle->scheme = scheme;
        handle->topology = outcome.topology;
        handle->allocation = outcome.allocation;
        handle->valid = outcome.valid;
        handle->used_fallback = outcome.used_fallback;
        handle->epochs = outcome.epochs;
        *out = handle.release();
    });
}

double ehr_solution_min_bits(const ehr_solution* sol) {
    return sol ? sol->allocation.b_ib : std::nan("");
}

double ehr_solution_max_bits(const ehr_solution* sol) {
    return sol ? sol->allocation.b_max : std::nan("");
}

int ehr_solution_parent(const ehr_solution* sol, int device) {
    if (!sol || device < 0 || device >= sol->topology.n_devices()) return -1;
    return sol->topology.parent[device];
}

double ehr_solution_slot(const ehr_solution* sol, int device) {
    if (!sol || device < 0 || device >= sol->topology.n_devices()) return std::nan("");
    return sol->allocation.slots.t[device];
}

int ehr_solution_valid(const ehr_solution* sol) { return sol && sol->valid ? 1 : 0; }

int ehr_solution_used_fallback(const ehr_solution* sol) {
    return sol && sol->used_fallback ? 1 : 0;
}

int ehr_solution_epochs(const ehr_solution* sol) { return sol ? sol->epochs : -1; }

ehr_status ehr_solution_save(const ehr_solution* sol, const char* path) {
    return guarded([&] {
        require(sol != nullptr, "solution must not be null");
        require(path != nullptr, "path must not be null");
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError(std::string("cannot open for writing: ") + path);
        f << solution_to_text(*sol);
        if (!f.flush()) throw IoError(std::string("write failed: ") + path);
    });
}

ehr_status ehr_solution_dot(const ehr_instance* inst, const ehr_solution* sol, char** out) {
    return guarded([&] {
        require(inst != nullptr, "instance must not be null");
        require(sol != nullptr, "solution must not be null");
        require(out != nullptr, "out must not be null");
        *out = dup_string(export_dot(inst->inst, sol->topology, sol->allocation.slots));
    });
}

void ehr_solution_free(ehr_solution* sol) { delete sol; }

/* ----- training -----------------------------------------------------------*/

ehr_status ehr_train(const ehr_instance* inst, const ehr_options* opts, ehr_training** out) {
    return guarded([&] {
        require(inst != nullptr, "instance must not be null");
        require(out != nullptr, "out must not be null");
        const OptionSet o = to_options(opts);
        auto handle = std::make_unique<ehr_training>();
        handle->n_devices = inst->inst.n_devices;
        handle->result = train(inst->inst, o.train, o.pt, o.adam, o.ib);
        *out = handle.release();
    });
}

int ehr_training_epochs(const ehr_training* tr) { return tr ? tr->result.epochs_run : -1; }

int ehr_training_stop_epoch(const ehr_training* tr) { return tr ? tr->result.stop_epoch : -1; }

ehr_status ehr_training_curve(const ehr_training* tr, int epoch, double* loss,
                              double* running_min, double* b_min) {
    return guarded([&] {
        require(tr != nullptr, "training must not be null");
        require(epoch >= 0 && epoch < tr->result.epochs_run, "epoch out of range");
        if (loss) *loss = tr->result.loss_history[epoch];
        if (running_min) *running_min = tr->result.running_min_history[epoch];
        if (b_min) *b_min = tr->result.b_min_history[epoch];
    });
}

ehr_status ehr_training_curves_csv(const ehr_training* tr, char** out) {
    return guarded([&] {
        require(tr != nullptr, "training must not be null");
        require(out != nullptr, "out must not be null");
        *out = dup_string(training_curves_csv(tr->result));
    });
}

ehr_status ehr_training_save_checkpoint(const ehr_training* tr, const char* path) {
    return guarded([&] {
        require(tr != nullptr, "training must not be null");
        require(path != nullptr, "path must not be null");
        Checkpoint ck;
        ck.net = tr->result.net;
        ck.adam = tr->result.adam_state;
        ck.epoch = tr->result.epochs_run;
        save_checkpoint(ck, path);
    });
}

ehr_status ehr_training_solution(const ehr_training* tr, const ehr_instance* inst,
                                 const ehr_options* opts, ehr_solution** out) {
    return guarded([&] {
        require(tr != nullptr, "training must not be null");
        require(inst != nullptr, "instance must not be null");
        require(out != nullptr, "out must not be null");
        require(inst->inst.n_devices == tr->n_devices,
                "instance does not match the trained device count");
        const OptionSet o = to_options(opts);
        auto handle = std::make_unique<ehr_solution>();
        handle->scheme = "proposed";
        Topology hard = post_process(tr->result.champion_soft, tr->n_devices);
        handle->valid = true;
        if (!validate_topology(hard)) {
            hard = direct_topology(tr->n_devices);
            handle->used_fallback = true;
        }
        handle->topology = std::move(hard);
        handle->allocation = allocate(inst->inst, handle->topology, o.ib);
        handle->valid = validate_topology(handle->topology);
        handle->epochs = tr->result.epochs_run;
        *out = handle.release();
    });
}

void ehr_training_free(ehr_training* tr) { delete tr; }

/* ----- benchmarking -------------------------------------------------------*/

ehr_status ehr_bench_run(const char* config_text, int workers, char** csv_out) {
    return guarded([&] {
        require(config_text != nullptr, "config must not be null");
        require(csv_out != nullptr, "out must not be null");
        ExperimentConfig cfg = parse_experiment_config(config_text);
        if (workers > 0) cfg.workers = workers;
        *csv_out = dup_string(rows_to_csv(run_experiment(cfg)));
    });
}

ehr_status ehr_bench_run_to_file(const char* config_text, int workers, const char* csv_path) {
    return guarded([&] {
        require(config_text != nullptr, "config must not be null");
        require(csv_path != nullptr, "path must not be null");
        ExperimentConfig cfg = parse_experiment_config(config_text);
        if (workers > 0) cfg.workers = workers;
        const std::string csv = rows_to_csv(run_experiment(cfg));
        std::ofstream f(csv_path, std::ios::binary);
        if (!f) throw IoError(std::string("cannot open for writing: ") + csv_path);
        f << csv;
        if (!f.flush()) throw IoError(std::string("write failed: ") + csv_path);
    });
}

}  // extern "C"
