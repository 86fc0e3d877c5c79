#pragma once

#include <cstdint>
#include <vector>

namespace ehrelay::ad {

// Handle into a Tape. Only meaningful together with the tape that minted it;
// mixing tapes is undefined.
struct Var {
    uint32_t idx = UINT32_MAX;
};

// Reverse-mode tape. Nodes carry values; edges carry local partials back to
// parent nodes. One backward() sweep walks the nodes once, newest to oldest,
// so gradient cost is linear in tape length. Single-threaded by design: one
// tape per training epoch, reset between epochs.
class Tape {
public:
    // Leaf with no parents. Gradients can be read for any node, so leaves
    // double as both constants and trainable inputs.
    Var leaf(double value);

    double value(Var v) const { return nodes_[v.idx].value; }
    size_t size() const { return nodes_.size(); }
    void reset();

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);    // throws std::domain_error when |denominator| underflows
    Var neg(Var a);
    Var exp(Var a);
    Var log2(Var a);          // throws std::domain_error for arguments <= 0
    Var relu(Var a);          // slope 0 at exactly 0
    Var min2(Var a, Var b);   // ties feed the gradient to the first argument
    Var affine(double a, Var x, double b);  // a*x + b with constant coefficients

    // Value copy that no gradient crosses.
    Var detach(Var a);

    // y = W x + bias with W given row-major (rows x cols) as tape vars.
    std::vector<Var> matvec_bias(const std::vector<Var>& w, const std::vector<Var>& bias,
                                 const std::vector<Var>& x, int rows, int cols);

    // Max-shifted softmax over one row; emits the full row Jacobian.
    std::vector<Var> row_softmax(const std::vector<Var>& x);

    // Accumulates d value(loss) / d value(node) for every node.
    void backward(Var loss);
    double grad(Var v) const;  // valid after backward()

private:
    struct Node {
        double value;
        uint32_t first_edge;
        uint32_t n_edges;
    };
    struct Edge {
        uint32_t parent;
        double partial;
    };

    Var push(double value);  // reserves a node, edges appended by caller
    void check(Var v) const;

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<double> grad_;
    bool grads_valid_ = false;
};

}  // namespace ehrelay::ad
