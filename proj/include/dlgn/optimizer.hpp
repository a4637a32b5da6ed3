#pragma once

#include "dlgn/tensor.hpp"

#include <string>
#include <vector>

namespace dlgn {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind optimizer_kind_from(const std::string& name);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    Scalar lr = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
};

/// Per-parameter moment buffers; allocated lazily on the first step.
struct OptimizerState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;
};

/// In-place update; params[i] and grads[i] must agree in shape.
void optimizer_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                    OptimizerState& state, const OptimizerConfig& cfg);

}  // namespace dlgn
