#include "dlgn/optimizer.hpp"

#include <cmath>

namespace dlgn {

OptimizerKind optimizer_kind_from(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    throw InputError("optimizer: unknown kind '" + name + "' (expected sgd|adam)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

void optimizer_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                    OptimizerState& state, const OptimizerConfig& cfg) {
    if (params.size() != grads.size())
        throw DimensionError("optimizer: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i]->same_shape(grads[i]))
            throw DimensionError("optimizer: shape mismatch at parameter " + std::to_string(i));

    if (cfg.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i]->array() -= cfg.lr * grads[i].array();
        ++state.step;
        return;
    }

    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Tensor* p : params) {
            state.m.push_back(Tensor::zeros(p->shape()));
            state.v.push_back(Tensor::zeros(p->shape()));
        }
    }
    ++state.step;
    const Scalar t = static_cast<Scalar>(state.step);
    const Scalar bias1 = 1.0 - std::pow(cfg.beta1, t);
    const Scalar bias2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.m[i].array();
        auto& v = state.v[i].array();
        const auto& g = grads[i].array();
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
        params[i]->array() -= cfg.lr * (m / bias1) / ((v / bias2).sqrt() + cfg.eps);
    }
}

}  // namespace dlgn
