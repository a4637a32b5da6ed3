#pragma once

#include "dlgn/ops.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace dlgn {

class Tape;

/// Handle to a node on a tape. Cheap to copy; owns nothing.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
    const Tensor& grad() const;
};

/// Single-owner, single-threaded reverse-mode tape. Nodes are recorded in
/// forward order, so reverse creation order is a reverse topological order.
class Tape {
public:
    using BackFn = std::function<void(Tape&, const Tensor& grad_out, int self)>;

    Var leaf(Tensor value, bool requires_grad = true);

    Var emit(Tensor value, const std::vector<Var>& parents, BackFn back);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    /// Gradient of the last backward()'s loss w.r.t. node `id`; zero if the
    /// node is not on a path to the loss.
    const Tensor& grad(int id);

    bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    void accumulate(int id, Tensor g);

    /// Reverse pass from a scalar loss node. Each node is visited once.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        bool has_grad = false;
        BackFn back;
    };

    void check(const Var& v) const {
        if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
            throw ContractError("tape: foreign or invalid node handle");
    }

    std::vector<Node> nodes_;
    friend struct Var;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline const Tensor& Var::grad() const { return tape->grad(id); }

// ---- recorded operations ---------------------------------------------------
// Each mirrors the eager Tensor function of the same name.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Scalar s);
Var add_scalar(Var a, Scalar s);
Var neg(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var add_bias(Var a, Var b);
Var scale_cols(Var a, const Tensor& s);
Var sum(Var a);
Var mean(Var a);
Var conv2d(Var input, Var kernel, Var bias);
Var conv2d(Var input, Var kernel);
Var adaptive_avg_pool_1x1(Var input);
Var softmax_cross_entropy(Var logits, std::vector<int> labels);
Var sigmoid_bce(Var logits, std::vector<int> labels);

/// Gradients of a scalar loss w.r.t. the given leaves (zero when unused).
std::vector<Tensor> gradients(Tape& tape, Var loss, const std::vector<Var>& wrt);

}  // namespace dlgn
