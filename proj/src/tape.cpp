#include "dlgn/tape.hpp"

namespace dlgn {

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::emit(Tensor value, const std::vector<Var>& parents, BackFn back) {
    bool needs = false;
    for (const Var& p : parents) {
        check(p);
        needs = needs || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
    }
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    if (needs) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Tensor& Tape::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, Tensor g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (!n.value.same_shape(g))
        throw ContractError("tape: gradient shape mismatch on accumulate");
    if (!n.has_grad) {
        n.grad = std::move(g);
        n.has_grad = true;
    } else {
        n.grad.array() += g.array();
    }
}

void Tape::backward(Var loss) {
    check(loss);
    if (loss.value().size() != 1)
        throw ContractError("tape: backward requires a scalar loss node");
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor();
    }
    Node& top = nodes_[static_cast<std::size_t>(loss.id)];
    top.grad = Tensor::ones(top.value.shape());
    top.has_grad = true;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.has_grad && n.back) n.back(*this, n.grad, i);
    }
}

std::vector<Tensor> gradients(Tape& tape, Var loss, const std::vector<Var>& wrt) {
    tape.backward(loss);
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const Var& v : wrt) out.push_back(tape.grad(v.id));
    return out;
}

namespace {

Tape& same_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw ContractError("tape: operands recorded on different tapes");
    return *a.tape;
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    Tensor y = matmul(a.value(), b.value());
    const int ia = a.id, ib = b.id;
    return t.emit(std::move(y), {a, b}, [ia, ib](Tape& t, const Tensor& gy, int) {
        if (t.needs(ia)) t.accumulate(ia, matmul_nt(gy, t.value(ib)));
        if (t.needs(ib)) t.accumulate(ib, matmul_tn(t.value(ia), gy));
    });
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return t.emit(add(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, const Tensor& gy, int) {
        t.accumulate(ia, gy);
        t.accumulate(ib, gy);
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return t.emit(sub(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, const Tensor& gy, int) {
        t.accumulate(ia, gy);
        if (t.needs(ib)) t.accumulate(ib, neg(gy));
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return t.emit(mul(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, const Tensor& gy, int) {
        if (t.needs(ia)) t.accumulate(ia, mul(gy, t.value(ib)));
        if (t.needs(ib)) t.accumulate(ib, mul(gy, t.value(ia)));
    });
}

Var scale(Var a, Scalar s) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.emit(scale(a.value(), s), {a},
                  [ia, s](Tape& t, const Tensor& gy, int) { t.accumulate(ia, scale(gy, s)); });
}

Var add_scalar(Var a, Scalar s) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.emit(add_scalar(a.value(), s), {a},
                  [ia](Tape& t, const Tensor& gy, int) { t.accumulate(ia, gy); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var sigmoid(Var a) {
    Tape& t = *a.tape;
    Tensor y = sigmoid(a.value());
    const int ia = a.id;
    return t.emit(std::move(y), {a}, [ia](Tape& t, const Tensor& gy, int self) {
        const Tensor& y = t.value(self);
        t.accumulate(ia, Tensor(y.shape(), gy.array() * y.array() * (1.0 - y.array())));
    });
}

Var tanh(Var a) {
    Tape& t = *a.tape;
    Tensor y = tanh(a.value());
    const int ia = a.id;
    return t.emit(std::move(y), {a}, [ia](Tape& t, const Tensor& gy, int self) {
        const Tensor& y = t.value(self);
        t.accumulate(ia, Tensor(y.shape(), gy.array() * (1.0 - y.array().square())));
    });
}

Var softplus(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.emit(softplus(a.value()), {a}, [ia](Tape& t, const Tensor& gy, int) {
        t.accumulate(ia, mul(gy, sigmoid(t.value(ia))));
    });
}

Var add_bias(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return t.emit(add_bias(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, const Tensor& gy, int) {
        t.accumulate(ia, gy);
        if (t.needs(ib)) {
            const Index cols = t.value(ib).dim(0);
            Tensor gb({cols});
            ConstMatMap g(gy.data(), gy.size() / cols, cols);
            gb.vec() = g.colwise().sum().transpose();
            t.accumulate(ib, std::move(gb));
        }
    });
}

Var scale_cols(Var a, const Tensor& s) {
    Tape& t = *a.tape;
    const int ia = a.id;
    Tensor sc = s;
    return t.emit(scale_cols(a.value(), s), {a}, [ia, sc](Tape& t, const Tensor& gy, int) {
        t.accumulate(ia, scale_cols(gy, sc));
    });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.emit(sum(a.value()), {a}, [ia](Tape& t, const Tensor& gy, int) {
        t.accumulate(ia, Tensor::full(t.value(ia).shape(), gy.value()));
    });
}

Var mean(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.emit(mean(a.value()), {a}, [ia](Tape& t, const Tensor& gy, int) {
        const Scalar n = static_cast<Scalar>(t.value(ia).size());
        t.accumulate(ia, Tensor::full(t.value(ia).shape(), gy.value() / n));
    });
}

Var conv2d(Var input, Var kernel, Var bias) {
    Tape& t = same_tape(input, kernel);
    Tensor y = conv2d(input.value(), kernel.value(), bias.value());
    const int ix = input.id, ik = kernel.id, ib = bias.id;
    return t.emit(std::move(y), {input, kernel, bias}, [ix, ik, ib](Tape& t, const Tensor& gy, int) {
        if (t.needs(ix)) t.accumulate(ix, conv2d_grad_input(gy, t.value(ik), t.value(ix).shape()));
        if (t.needs(ik)) t.accumulate(ik, conv2d_grad_kernel(gy, t.value(ix), t.value(ik).shape()));
        if (t.needs(ib)) t.accumulate(ib, conv2d_grad_bias(gy));
    });
}

Var conv2d(Var input, Var kernel) {
    Tape& t = same_tape(input, kernel);
    Tensor y = conv2d(input.value(), kernel.value(), Tensor());
    const int ix = input.id, ik = kernel.id;
    return t.emit(std::move(y), {input, kernel}, [ix, ik](Tape& t, const Tensor& gy, int) {
        if (t.needs(ix)) t.accumulate(ix, conv2d_grad_input(gy, t.value(ik), t.value(ix).shape()));
        if (t.needs(ik)) t.accumulate(ik, conv2d_grad_kernel(gy, t.value(ix), t.value(ik).shape()));
    });
}

Var adaptive_avg_pool_1x1(Var input) {
    Tape& t = *input.tape;
    const int ix = input.id;
    return t.emit(adaptive_avg_pool_1x1(input.value()), {input}, [ix](Tape& t, const Tensor& gy, int) {
        const Shape& s = t.value(ix).shape();
        const Index hw = s[2] * s[3];
        Tensor gx(s);
        for (Index r = 0; r < s[0] * s[1]; ++r) {
            const Scalar v = gy[r] / static_cast<Scalar>(hw);
            Scalar* dst = gx.data() + r * hw;
            for (Index i = 0; i < hw; ++i) dst[i] = v;
        }
        t.accumulate(ix, std::move(gx));
    });
}

Var softmax_cross_entropy(Var logits, std::vector<int> labels) {
    Tape& t = *logits.tape;
    Tensor y = softmax_cross_entropy(logits.value(), labels);
    const int iz = logits.id;
    return t.emit(std::move(y), {logits}, [iz, labels = std::move(labels)](Tape& t, const Tensor& gy, int) {
        Tensor g = softmax_cross_entropy_grad(t.value(iz), labels);
        t.accumulate(iz, scale(g, gy.value()));
    });
}

Var sigmoid_bce(Var logits, std::vector<int> labels) {
    Tape& t = *logits.tape;
    Tensor y = sigmoid_bce(logits.value(), labels);
    const int iz = logits.id;
    return t.emit(std::move(y), {logits}, [iz, labels = std::move(labels)](Tape& t, const Tensor& gy, int) {
        Tensor g = sigmoid_bce_grad(t.value(iz), labels);
        t.accumulate(iz, scale(g, gy.value()));
    });
}

}  // namespace dlgn
