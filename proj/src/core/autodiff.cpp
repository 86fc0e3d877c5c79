#include "core/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ehrelay::ad {

namespace {
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kDenomFloor = 1e-300;
}  // namespace

void Tape::check(Var v) const {
    if (v.idx >= nodes_.size()) throw std::logic_error("ad::Tape: var from another tape or reset");
}

Var Tape::push(double value) {
    nodes_.push_back({value, static_cast<uint32_t>(edges_.size()), 0});
    grads_valid_ = false;
    return {static_cast<uint32_t>(nodes_.size() - 1)};
}

void Tape::reset() {
    nodes_.clear();
    edges_.clear();
    grad_.clear();
    grads_valid_ = false;
}

Var Tape::leaf(double value) { return push(value); }

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    Var r = push(value(a) + value(b));
    edges_.push_back({a.idx, 1.0});
    edges_.push_back({b.idx, 1.0});
    nodes_[r.idx].n_edges = 2;
    return r;
}

Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    Var r = push(value(a) - value(b));
    edges_.push_back({a.idx, 1.0});
    edges_.push_back({b.idx, -1.0});
    nodes_[r.idx].n_edges = 2;
    return r;
}

Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    const double va = value(a), vb = value(b);
    Var r = push(va * vb);
    edges_.push_back({a.idx, vb});
    edges_.push_back({b.idx, va});
    nodes_[r.idx].n_edges = 2;
    return r;
}

Var Tape::div(Var a, Var b) {
    check(a);
    check(b);
    const double va = value(a), vb = value(b);
    if (std::fabs(vb) < kDenomFloor)
        throw std::domain_error("ad::Tape: division by " + std::to_string(vb));
    Var r = push(va / vb);
    edges_.push_back({a.idx, 1.0 / vb});
    edges_.push_back({b.idx, -va / (vb * vb)});
    nodes_[r.idx].n_edges = 2;
    return r;
}

Var Tape::neg(Var a) {
    check(a);
    Var r = push(-value(a));
    edges_.push_back({a.idx, -1.0});
    nodes_[r.idx].n_edges = 1;
    return r;
}

Var Tape::exp(Var a) {
    check(a);
    const double v = std::exp(value(a));
    Var r = push(v);
    edges_.push_back({a.idx, v});
    nodes_[r.idx].n_edges = 1;
    return r;
}

Var Tape::log2(Var a) {
    check(a);
    const double va = value(a);
    if (!(va > 0.0))
        throw std::domain_error("ad::Tape: log2 of " + std::to_string(va));
    Var r = push(std::log2(va));
    edges_.push_back({a.idx, 1.0 / (va * kLn2)});
    nodes_[r.idx].n_edges = 1;
    return r;
}

Var Tape::relu(Var a) {
    check(a);
    const double va = value(a);
    Var r = push(va > 0.0 ? va : 0.0);
    edges_.push_back({a.idx, va > 0.0 ? 1.0 : 0.0});
    nodes_[r.idx].n_edges = 1;
    return r;
}

Var Tape::min2(Var a, Var b) {
    check(a);
    check(b);
    const Var winner = value(a) <= value(b) ? a : b;
    Var r = push(value(winner));
    edges_.push_back({winner.idx, 1.0});
    nodes_[r.idx].n_edges = 1;
    return r;
}

Var Tape::affine(double a, Var x, double b) {
    check(x);
    Var r = push(a * value(x) + b);
    edges_.push_back({x.idx, a});
    nodes_[r.idx].n_edges = 1;
    return r;
}

Var Tape::detach(Var a) {
    check(a);
    return push(value(a));  // no edges: backward stops here
}

std::vector<Var> Tape::matvec_bias(const std::vector<Var>& w, const std::vector<Var>& bias,
                                   const std::vector<Var>& x, int rows, int cols) {
    if (w.size() != static_cast<size_t>(rows) * cols)
        throw std::invalid_argument("matvec_bias: weight shape mismatch");
    if (bias.size() != static_cast<size_t>(rows))
        throw std::invalid_argument("matvec_bias: bias shape mismatch");
    if (x.size() != static_cast<size_t>(cols))
        throw std::invalid_argument("matvec_bias: input shape mismatch");
    std::vector<Var> y(rows);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) {
            check(w[static_cast<size_t>(r) * cols + c]);
            check(x[c]);
            acc += value(w[static_cast<size_t>(r) * cols + c]) * value(x[c]);
        }
        check(bias[r]);
        acc += value(bias[r]);
        Var out = push(acc);
        for (int c = 0; c < cols; ++c) {
            const Var wv = w[static_cast<size_t>(r) * cols + c];
            edges_.push_back({wv.idx, value(x[c])});
            edges_.push_back({x[c].idx, value(wv)});
        }
        edges_.push_back({bias[r].idx, 1.0});
        nodes_[out.idx].n_edges = static_cast<uint32_t>(2 * cols + 1);
        y[r] = out;
    }
    return y;
}

std::vector<Var> Tape::row_softmax(const std::vector<Var>& x) {
    const size_t n = x.size();
    if (n == 0) throw std::invalid_argument("row_softmax: empty row");
    for (const Var v : x) check(v);
    double m = value(x[0]);
    for (size_t j = 1; j < n; ++j) m = std::max(m, value(x[j]));
    std::vector<double> e(n);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
        e[j] = std::exp(value(x[j]) - m);
        sum += e[j];
    }
    std::vector<double> y(n);
    for (size_t j = 0; j < n; ++j) y[j] = e[j] / sum;
    // dy_i/dx_j = y_i * (delta_ij - y_j); every output couples to every input.
    std::vector<Var> out(n);
    for (size_t i = 0; i < n; ++i) {
        Var r = push(y[i]);
        for (size_t j = 0; j < n; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            edges_.push_back({x[j].idx, y[i] * (delta - y[j])});
        }
        nodes_[r.idx].n_edges = static_cast<uint32_t>(n);
        out[i] = r;
    }
    return out;
}

void Tape::backward(Var loss) {
    check(loss);
    grad_.assign(nodes_.size(), 0.0);
    grad_[loss.idx] = 1.0;
    // Reverse topological order is just reverse creation order; nodes newer
    // than the loss cannot feed it and are skipped by the zero-grad test.
    for (uint32_t i = loss.idx + 1; i-- > 0;) {
        const double g = grad_[i];
        if (g == 0.0) continue;
        const Node& node = nodes_[i];
        for (uint32_t e = 0; e < node.n_edges; ++e) {
            const Edge& edge = edges_[node.first_edge + e];
            grad_[edge.parent] += g * edge.partial;
        }
    }
    grads_valid_ = true;
}

double Tape::grad(Var v) const {
    check(v);
    if (!grads_valid_) throw std::logic_error("ad::Tape: grad() before backward()");
    return v.idx < grad_.size() ? grad_[v.idx] : 0.0;
}

}  // namespace ehrelay::ad
