#pragma once

#include "dlgn/tensor.hpp"

#include <vector>

namespace dlgn {

// ---- shape helpers -------------------------------------------------------

void require_matmul_shapes(const Tensor& a, const Tensor& b);
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// ---- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]·[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a · bᵀ
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // aᵀ · b
Tensor transpose(const Tensor& a);

// ---- elementwise ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor add_scalar(const Tensor& a, Scalar s);
Tensor neg(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);  // log(1 + e^x), overflow-safe

/// sign with sign(0) = 0.
Tensor sign(const Tensor& a);
/// Hard gate 1[x > 0].
Tensor gate_indicator(const Tensor& a);
Tensor clamp(const Tensor& a, Scalar lo, Scalar hi);

/// Row-broadcast bias add: a [N,M] (+ leading dims collapsed) + b [M] per row.
Tensor add_bias(const Tensor& a, const Tensor& b);
/// Row-broadcast multiply: a [N,M] ⊙ s [M] per row.
Tensor scale_cols(const Tensor& a, const Tensor& s);

// ---- reductions (fixed traversal order; deterministic) --------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- network-shaped ops ----------------------------------------------------

/// Cross-correlation, kernel 3x3, zero padding 1, stride 1; spatial dims kept.
/// input [N,Ci,H,W], kernel [Co,Ci,3,3], bias [Co] (empty tensor = no bias).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);
/// Gradient pieces for conv2d, shared by the tape.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape);
Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape);
Tensor conv2d_grad_bias(const Tensor& grad_out);

/// [N,C,H,W] -> [N,C], mean over the spatial plane.
Tensor adaptive_avg_pool_1x1(const Tensor& input);

/// Mean softmax cross-entropy over the batch; logits [N,K].
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);
Tensor softmax_cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels);

/// Mean sigmoid binary cross-entropy; logits [N] or [N,1], labels in {0,1}.
Tensor sigmoid_bce(const Tensor& logits, const std::vector<int>& labels);
Tensor sigmoid_bce_grad(const Tensor& logits, const std::vector<int>& labels);

}  // namespace dlgn
