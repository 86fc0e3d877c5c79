#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/ib_allocator.hpp"
#include "core/pt_evm.hpp"
#include "core/system_model.hpp"

namespace ehrelay {

// ===== network ==============================================================

// Four fully connected layers, ReLU between the hidden ones, then a reshape
// to N_d x (N_d+1) and a per-row softmax. Maps a latent sample to a soft
// relay adjacency.
struct GeneratorNet {
    int n_devices = 0;
    std::array<int, 5> sizes{};               // s0 (latent) .. s4 (= N_d*(N_d+1))
    std::vector<std::vector<double>> weights;  // [4], row-major out x in
    std::vector<std::vector<double>> biases;   // [4]

    size_t param_count() const;
};

// s0 = ceil(N_d*sqrt(N_d)), s4 = N_d*(N_d+1), inner sizes on the straight
// line between them (rounded to nearest).
std::array<int, 5> layer_sizes(int n_devices);

// Glorot-uniform weights, zero biases. Deterministic in (n_devices, seed).
GeneratorNet init_net(int n_devices, uint64_t seed);

// Parameters staged on a tape for one epoch, in packing order.
struct StagedNet {
    std::vector<std::vector<ad::Var>> weights;
    std::vector<std::vector<ad::Var>> biases;
};
StagedNet stage(const GeneratorNet& net, ad::Tape& tape);

// Soft adjacency vars, row-major N_d x (N_d+1), for one latent sample.
std::vector<ad::Var> forward(const GeneratorNet& net, const StagedNet& staged,
                             const std::vector<double>& latent, ad::Tape& tape);

// Flat parameter order used by gradients, Adam moments and checkpoints:
// layer by layer, weights row-major then biases.
std::vector<double> flatten_params(const GeneratorNet& net);
void collect_grads(const StagedNet& staged, const ad::Tape& tape, std::vector<double>& out);

// ===== optimizer ============================================================

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<double> m, v;  // first/second moment per parameter
    long step = 0;             // completed updates

    explicit AdamState(const AdamConfig& c = {}, size_t n_params = 0)
        : cfg(c), m(n_params, 0.0), v(n_params, 0.0) {}
};

// One bias-corrected update, applied to the net parameters in packing order.
void adam_step(GeneratorNet& net, const std::vector<double>& grads, AdamState& state);

// ===== training =============================================================

struct TrainConfig {
    uint64_t seed = 1;    // split into init and latent streams internally
    int max_epochs = 2000;
    int patience = 0;     // <= 0: ceil(30 + 500 / N_d) epochs without a new best
    int extra_epochs = 0; // keep training this long past the stopping point
};

struct TrainResult {
    GeneratorNet net;
    AdamState adam_state;               // optimizer state at the last epoch
    std::vector<double> champion_soft;  // best-loss soft adjacency seen
    double champion_loss = 0.0;
    int champion_epoch = -1;
    int stop_epoch = -1;   // epoch where the patience rule fired (or the last one)
    int epochs_run = 0;
    std::vector<double> loss_history;         // one entry per epoch
    std::vector<double> running_min_history;  // champion loss so far
    std::vector<double> b_min_history;        // worst-device budget of the
                                              // hardened champion (direct
                                              // fallback while it is invalid)
};

// One epoch = one latent sample, one walk, one Adam update. The champion soft
// adjacency is what inference uses, not the final-epoch weights.
TrainResult train(const NetworkInstance& inst, const TrainConfig& tc, const PtConfig& pt,
                  const AdamConfig& adam, const IbConfig& ib = {});

// Per-row argmax hardening; ties pick the lowest column.
Topology post_process(const std::vector<double>& soft, int n_devices);

struct ProposeResult {
    Topology topology;
    IbResult allocation;
    bool hardened_valid = true;  // argmax of the champion reached the sink
    bool used_fallback = false;  // fell back to the direct topology
    int epochs_run = 0;
    TrainResult training;
};

// Full pipeline: train, harden the champion, fall back to direct if the
// argmax graph cannot reach the sink, then balance slots on the result.
ProposeResult propose_topology(const NetworkInstance& inst, const TrainConfig& tc,
                               const PtConfig& pt, const AdamConfig& adam,
                               const IbConfig& ib = {});

// ===== checkpoints ==========================================================

struct Checkpoint {
    GeneratorNet net;
    AdamState adam;
    int epoch = 0;
};

// Text form, %.17g doubles, bit-exact round trip.
std::string checkpoint_to_text(const Checkpoint& ck);
Checkpoint checkpoint_from_text(const std::string& text);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ehrelay
