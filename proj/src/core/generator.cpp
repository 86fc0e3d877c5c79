#include "core/generator.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "core/baselines.hpp"
#include "core/rng.hpp"
#include "core/textio.hpp"

namespace ehrelay {

namespace {

// Stream tags so one training seed yields independent init and latent draws.
constexpr uint64_t kInitStream = 1;
constexpr uint64_t kLatentStream = 2;

template <typename Fn>
void for_each_param(GeneratorNet& net, Fn&& fn) {
    for (int l = 0; l < 4; ++l) {
        for (double& w : net.weights[l]) fn(w);
        for (double& b : net.biases[l]) fn(b);
    }
}

}  // namespace

// ===== network ==============================================================

size_t GeneratorNet::param_count() const {
    size_t n = 0;
    for (int l = 0; l < 4; ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::array<int, 5> layer_sizes(int n_devices) {
    if (n_devices < 1) throw std::invalid_argument("layer_sizes: need at least one device");
    const double nd = n_devices;
    std::array<int, 5> s{};
    s[0] = static_cast<int>(std::ceil(nd * std::sqrt(nd)));
    s[4] = n_devices * (n_devices + 1);
    for (int k = 1; k <= 3; ++k)
        s[k] = static_cast<int>(std::lround(s[0] + k * (s[4] - s[0]) / 4.0));
    return s;
}

GeneratorNet init_net(int n_devices, uint64_t seed) {
    GeneratorNet net;
    net.n_devices = n_devices;
    net.sizes = layer_sizes(n_devices);
    net.weights.resize(4);
    net.biases.resize(4);
    SplitMix64 rng(seed);
    for (int l = 0; l < 4; ++l) {
        const int fan_in = net.sizes[l];
        const int fan_out = net.sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        net.weights[l].resize(static_cast<size_t>(fan_out) * fan_in);
        for (double& w : net.weights[l]) w = (2.0 * rng.uniform() - 1.0) * limit;
        net.biases[l].assign(fan_out, 0.0);
    }
    return net;
}

StagedNet stage(const GeneratorNet& net, ad::Tape& tape) {
    StagedNet staged;
    staged.weights.resize(4);
    staged.biases.resize(4);
    for (int l = 0; l < 4; ++l) {
        staged.weights[l].resize(net.weights[l].size());
        for (size_t k = 0; k < net.weights[l].size(); ++k)
            staged.weights[l][k] = tape.leaf(net.weights[l][k]);
        staged.biases[l].resize(net.biases[l].size());
        for (size_t k = 0; k < net.biases[l].size(); ++k)
            staged.biases[l][k] = tape.leaf(net.biases[l][k]);
    }
    return staged;
}

std::vector<ad::Var> forward(const GeneratorNet& net, const StagedNet& staged,
                             const std::vector<double>& latent, ad::Tape& tape) {
    if (latent.size() != static_cast<size_t>(net.sizes[0]))
        throw std::invalid_argument("forward: latent size mismatch");
    std::vector<ad::Var> x(latent.size());
    for (size_t k = 0; k < latent.size(); ++k) x[k] = tape.leaf(latent[k]);
    for (int l = 0; l < 4; ++l) {
        x = tape.matvec_bias(staged.weights[l], staged.biases[l], x, net.sizes[l + 1],
                             net.sizes[l]);
        if (l < 3)
            for (ad::Var& v : x) v = tape.relu(v);
    }
    // Reshape to N_d rows of N_d+1 logits, then normalize each row.
    const int n = net.n_devices;
    const int cols = n + 1;
    std::vector<ad::Var> soft;
    soft.reserve(static_cast<size_t>(n) * cols);
    for (int i = 0; i < n; ++i) {
        std::vector<ad::Var> row(x.begin() + static_cast<size_t>(i) * cols,
                                 x.begin() + static_cast<size_t>(i + 1) * cols);
        std::vector<ad::Var> sm = tape.row_softmax(row);
        soft.insert(soft.end(), sm.begin(), sm.end());
    }
    return soft;
}

std::vector<double> flatten_params(const GeneratorNet& net) {
    std::vector<double> out;
    out.reserve(net.param_count());
    for_each_param(const_cast<GeneratorNet&>(net), [&](double& p) { out.push_back(p); });
    return out;
}

void collect_grads(const StagedNet& staged, const ad::Tape& tape, std::vector<double>& out) {
    out.clear();
    for (int l = 0; l < 4; ++l) {
        for (const ad::Var v : staged.weights[l]) out.push_back(tape.grad(v));
        for (const ad::Var v : staged.biases[l]) out.push_back(tape.grad(v));
    }
}

// ===== optimizer ============================================================

void adam_step(GeneratorNet& net, const std::vector<double>& grads, AdamState& state) {
    const size_t n = net.param_count();
    if (grads.size() != n) throw std::invalid_argument("adam_step: gradient size mismatch");
    if (state.m.size() != n || state.v.size() != n)
        throw std::invalid_argument("adam_step: state size mismatch");
    const AdamConfig& c = state.cfg;
    state.step += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    size_t k = 0;
    for_each_param(net, [&](double& p) {
        const double g = grads[k];
        state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * g;
        state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * g * g;
        const double m_hat = state.m[k] / bc1;
        const double v_hat = state.v[k] / bc2;
        p -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        ++k;
    });
}

// ===== training =============================================================

Topology post_process(const std::vector<double>& soft, int n_devices) {
    const int cols = n_devices + 1;
    if (soft.size() != static_cast<size_t>(n_devices) * cols)
        throw std::invalid_argument("post_process: adjacency has wrong shape");
    Topology t;
    t.parent.resize(n_devices);
    for (int i = 0; i < n_devices; ++i) {
        int best = 0;
        for (int j = 1; j < cols; ++j)
            if (soft[static_cast<size_t>(i) * cols + j] >
                soft[static_cast<size_t>(i) * cols + best])
                best = j;  // strict: ties keep the lowest column
        t.parent[i] = best;
    }
    return t;
}

TrainResult train(const NetworkInstance& inst, const TrainConfig& tc, const PtConfig& pt,
                  const AdamConfig& adam, const IbConfig& ib) {
    const int n = inst.n_devices;
    if (tc.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
    const int patience =
        tc.patience > 0 ? tc.patience : static_cast<int>(std::ceil(30.0 + 500.0 / n));

    TrainResult res;
    res.net = init_net(n, mix_seed(tc.seed, kInitStream));
    SplitMix64 latent_rng(mix_seed(tc.seed, kLatentStream));
    AdamState state(adam, res.net.param_count());
    res.champion_loss = std::numeric_limits<double>::infinity();

    // Worst-device budget of the hardened champion, refreshed only when the
    // champion moves. While the argmax graph is invalid the pipeline would
    // fall back to direct, so that is what the curve reports.
    double champ_b_min = 0.0;
    bool champ_dirty = false;

    ad::Tape tape;
    std::vector<double> grads;
    std::vector<double> latent(static_cast<size_t>(res.net.sizes[0]));
    for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
        tape.reset();
        const StagedNet staged = stage(res.net, tape);
        for (double& z : latent) z = latent_rng.uniform();
        const std::vector<ad::Var> soft = forward(res.net, staged, latent, tape);
        const RateAssessment assessment = rate_pt(inst, soft, pt, tape);
        const ad::Var loss = training_loss(assessment, tape);
        tape.backward(loss);
        collect_grads(staged, tape, grads);
        adam_step(res.net, grads, state);

        const double loss_value = tape.value(loss);
        res.loss_history.push_back(loss_value);
        if (loss_value < res.champion_loss) {
            res.champion_loss = loss_value;
            res.champion_epoch = epoch;
            res.champion_soft.resize(soft.size());
            for (size_t k = 0; k < soft.size(); ++k) res.champion_soft[k] = tape.value(soft[k]);
            champ_dirty = true;
        }
        res.running_min_history.push_back(res.champion_loss);

        if (champ_dirty) {
            Topology hard = post_process(res.champion_soft, n);
            if (!validate_topology(hard)) hard = direct_topology(n);
            champ_b_min = allocate(inst, hard, ib).b_ib;
            champ_dirty = false;
        }
        res.b_min_history.push_back(champ_b_min);

        res.epochs_run = epoch + 1;
        if (res.stop_epoch < 0 && epoch - res.champion_epoch >= patience) res.stop_epoch = epoch;
        if (res.stop_epoch >= 0 && epoch >= res.stop_epoch + tc.extra_epochs) break;
    }
    if (res.stop_epoch < 0) res.stop_epoch = res.epochs_run - 1;  // ran into max_epochs
    res.adam_state = std::move(state);
    return res;
}

ProposeResult propose_topology(const NetworkInstance& inst, const TrainConfig& tc,
                               const PtConfig& pt, const AdamConfig& adam, const IbConfig& ib) {
    ProposeResult res;
    res.training = train(inst, tc, pt, adam, ib);
    Topology hard = post_process(res.training.champion_soft, inst.n_devices);
    res.hardened_valid = validate_topology(hard);
    if (!res.hardened_valid) {
        hard = direct_topology(inst.n_devices);
        res.used_fallback = true;
    }
    res.topology = std::move(hard);
    res.allocation = allocate(inst, res.topology, ib);
    res.epochs_run = res.training.epochs_run;
    return res;
}

// ===== checkpoints ==========================================================

std::string checkpoint_to_text(const Checkpoint& ck) {
    std::ostringstream out;
    out << "ehrelay-checkpoint v1\n";
    out << "devices " << ck.net.n_devices << "\n";
    out << "sizes";
    for (const int s : ck.net.sizes) out << " " << s;
    out << "\n";
    out << "epoch " << ck.epoch << "\n";
    out << "adam_step " << ck.adam.step << "\n";
    out << "adam_hyper " << fmt_double(ck.adam.cfg.learning_rate) << " "
        << fmt_double(ck.adam.cfg.beta1) << " " << fmt_double(ck.adam.cfg.beta2) << " "
        << fmt_double(ck.adam.cfg.epsilon) << "\n";
    for (int l = 0; l < 4; ++l) {
        out << "weights " << l << " " << ck.net.weights[l].size();
        for (const double w : ck.net.weights[l]) out << " " << fmt_double(w);
        out << "\n";
        out << "biases " << l << " " << ck.net.biases[l].size();
        for (const double b : ck.net.biases[l]) out << " " << fmt_double(b);
        out << "\n";
    }
    out << "adam_m " << ck.adam.m.size();
    for (const double m : ck.adam.m) out << " " << fmt_double(m);
    out << "\n";
    out << "adam_v " << ck.adam.v.size();
    for (const double v : ck.adam.v) out << " " << fmt_double(v);
    out << "\n";
    out << "end\n";
    return out.str();
}

namespace {

void ck_fail(int line_no, const std::string& why) {
    throw std::invalid_argument("checkpoint text, line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

Checkpoint checkpoint_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) ck_fail(line_no, std::string("missing ") + what);
        ++line_no;
        return std::istringstream(line);
    };
    auto expect_tag = [&](std::istringstream& ls, const char* tag) {
        std::string got;
        ls >> got;
        if (got != tag) ck_fail(line_no, std::string("expected '") + tag + "'");
    };
    auto read_vector = [&](std::istringstream& ls, std::vector<double>& dst, size_t expect) {
        size_t count;
        if (!(ls >> count) || count != expect) ck_fail(line_no, "unexpected element count");
        dst.resize(count);
        for (size_t k = 0; k < count; ++k)
            if (!(ls >> dst[k])) ck_fail(line_no, "bad element");
    };

    {
        auto ls = next_line("header");
        std::string magic, version;
        ls >> magic >> version;
        if (magic != "ehrelay-checkpoint" || version != "v1")
            ck_fail(line_no, "not an ehrelay-checkpoint v1 file");
    }
    Checkpoint ck;
    {
        auto ls = next_line("devices");
        expect_tag(ls, "devices");
        if (!(ls >> ck.net.n_devices) || ck.net.n_devices < 1) ck_fail(line_no, "bad device count");
    }
    {
        auto ls = next_line("sizes");
        expect_tag(ls, "sizes");
        for (int& s : ck.net.sizes)
            if (!(ls >> s) || s < 1) ck_fail(line_no, "bad layer size");
        if (ck.net.sizes != layer_sizes(ck.net.n_devices))
            ck_fail(line_no, "layer sizes do not match the device count");
    }
    {
        auto ls = next_line("epoch");
        expect_tag(ls, "epoch");
        if (!(ls >> ck.epoch) || ck.epoch < 0) ck_fail(line_no, "bad epoch");
    }
    {
        auto ls = next_line("adam_step");
        expect_tag(ls, "adam_step");
        if (!(ls >> ck.adam.step) || ck.adam.step < 0) ck_fail(line_no, "bad adam step");
    }
    {
        auto ls = next_line("adam_hyper");
        expect_tag(ls, "adam_hyper");
        AdamConfig& c = ck.adam.cfg;
        if (!(ls >> c.learning_rate >> c.beta1 >> c.beta2 >> c.epsilon))
            ck_fail(line_no, "bad adam hyperparameters");
    }
    ck.net.weights.resize(4);
    ck.net.biases.resize(4);
    for (int l = 0; l < 4; ++l) {
        const size_t n_w =
            static_cast<size_t>(ck.net.sizes[l + 1]) * static_cast<size_t>(ck.net.sizes[l]);
        {
            auto ls = next_line("weights");
            expect_tag(ls, "weights");
            int idx;
            if (!(ls >> idx) || idx != l) ck_fail(line_no, "weights lines out of order");
            read_vector(ls, ck.net.weights[l], n_w);
        }
        {
            auto ls = next_line("biases");
            expect_tag(ls, "biases");
            int idx;
            if (!(ls >> idx) || idx != l) ck_fail(line_no, "biases lines out of order");
            read_vector(ls, ck.net.biases[l], static_cast<size_t>(ck.net.sizes[l + 1]));
        }
    }
    const size_t n_params = ck.net.param_count();
    {
        auto ls = next_line("adam_m");
        expect_tag(ls, "adam_m");
        read_vector(ls, ck.adam.m, n_params);
    }
    {
        auto ls = next_line("adam_v");
        expect_tag(ls, "adam_v");
        read_vector(ls, ck.adam.v, n_params);
    }
    {
        auto ls = next_line("end");
        expect_tag(ls, "end");
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << checkpoint_to_text(ck);
    if (!out.flush()) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_text(buf.str());
}

}  // namespace ehrelay
