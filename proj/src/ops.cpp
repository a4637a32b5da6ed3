#include "dlgn/ops.hpp"

#include <cmath>

namespace dlgn {

void require_matmul_shapes(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matmul_shapes(a, b);
    Tensor y({a.dim(0), b.dim(1)});
    y.mat().noalias() = a.mat() * b.mat();
    return y;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw DimensionError("matmul_nt: shape mismatch");
    Tensor y({a.dim(0), b.dim(0)});
    y.mat().noalias() = a.mat() * b.mat().transpose();
    return y;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw DimensionError("matmul_tn: shape mismatch");
    Tensor y({a.dim(1), b.dim(1)});
    y.mat().noalias() = a.mat().transpose() * b.mat();
    return y;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: expected rank-2");
    Tensor y({a.dim(1), a.dim(0)});
    y.mat() = a.mat().transpose();
    return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    return Tensor(a.shape(), a.array() + b.array());
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    return Tensor(a.shape(), a.array() - b.array());
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    return Tensor(a.shape(), a.array() * b.array());
}

Tensor scale(const Tensor& a, Scalar s) { return Tensor(a.shape(), a.array() * s); }

Tensor add_scalar(const Tensor& a, Scalar s) { return Tensor(a.shape(), a.array() + s); }

Tensor neg(const Tensor& a) { return Tensor(a.shape(), -a.array()); }

Tensor sigmoid(const Tensor& a) {
    return Tensor(a.shape(), 1.0 / (1.0 + (-a.array()).exp()));
}

Tensor tanh(const Tensor& a) { return Tensor(a.shape(), a.array().tanh()); }

Tensor softplus(const Tensor& a) {
    // log(1+e^x) = max(x,0) + log1p(e^{-|x|})
    Tensor y(a.shape());
    const Scalar* x = a.data();
    Scalar* out = y.data();
    for (Index i = 0; i < a.size(); ++i)
        out[i] = std::max(x[i], 0.0) + std::log1p(std::exp(-std::abs(x[i])));
    return y;
}

Tensor sign(const Tensor& a) {
    Tensor y(a.shape());
    const Scalar* x = a.data();
    Scalar* out = y.data();
    for (Index i = 0; i < a.size(); ++i) out[i] = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
    return y;
}

Tensor gate_indicator(const Tensor& a) {
    Tensor y(a.shape());
    const Scalar* x = a.data();
    Scalar* out = y.data();
    for (Index i = 0; i < a.size(); ++i) out[i] = x[i] > 0.0 ? 1.0 : 0.0;
    return y;
}

Tensor clamp(const Tensor& a, Scalar lo, Scalar hi) {
    return Tensor(a.shape(), a.array().max(lo).min(hi));
}

Tensor add_bias(const Tensor& a, const Tensor& b) {
    if (b.rank() != 1 || a.rank() < 2 || a.shape().back() != b.dim(0))
        throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " does not match " +
                             shape_str(a.shape()));
    Tensor y = a;
    const Index cols = b.dim(0);
    Eigen::Map<MatrixRM> m(y.data(), y.size() / cols, cols);
    m.rowwise() += b.vec().transpose();
    return y;
}

Tensor scale_cols(const Tensor& a, const Tensor& s) {
    if (s.rank() != 1 || a.rank() < 2 || a.shape().back() != s.dim(0))
        throw DimensionError("scale_cols: scale " + shape_str(s.shape()) + " does not match " +
                             shape_str(a.shape()));
    Tensor y = a;
    const Index cols = s.dim(0);
    Eigen::Map<MatrixRM> m(y.data(), y.size() / cols, cols);
    m.array().rowwise() *= s.vec().transpose().array();
    return y;
}

Tensor sum(const Tensor& a) { return Tensor::scalar(a.array().sum()); }

Tensor mean(const Tensor& a) { return Tensor::scalar(a.array().sum() / static_cast<Scalar>(a.size())); }

namespace {

void require_conv_shapes(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.rank() != 4) throw DimensionError("conv2d: input must be [N,C,H,W]");
    if (kernel.rank() != 4) throw DimensionError("conv2d: kernel must be [Co,Ci,3,3]");
    if (kernel.dim(2) != 3 || kernel.dim(3) != 3)
        throw DimensionError("conv2d: kernel spatial size must be 3x3");
    if (kernel.dim(1) != input.dim(1))
        throw DimensionError("conv2d: channel mismatch, input " + shape_str(input.shape()) +
                             " vs kernel " + shape_str(kernel.shape()));
    if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != kernel.dim(0)))
        throw DimensionError("conv2d: bias must be [Co]");
}

// cols [Ci*9, H*W] for one sample, zero padding 1.
void im2col(const Scalar* x, Index ci, Index h, Index w, MatrixRM& cols) {
    cols.setZero();
    for (Index c = 0; c < ci; ++c) {
        const Scalar* plane = x + c * h * w;
        for (Index kh = 0; kh < 3; ++kh) {
            for (Index kw = 0; kw < 3; ++kw) {
                Scalar* row = cols.row(c * 9 + kh * 3 + kw).data();
                const Index dy = kh - 1, dx = kw - 1;
                for (Index y = 0; y < h; ++y) {
                    const Index sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const Index x0 = std::max<Index>(0, -dx);
                    const Index x1 = std::min<Index>(w, w - dx);
                    const Scalar* src = plane + sy * w;
                    Scalar* dst = row + y * w;
                    for (Index xx = x0; xx < x1; ++xx) dst[xx] = src[xx + dx];
                }
            }
        }
    }
}

// Transpose of im2col: scatter-add cols back into an image.
void col2im(const MatrixRM& cols, Index ci, Index h, Index w, Scalar* x) {
    for (Index c = 0; c < ci; ++c) {
        Scalar* plane = x + c * h * w;
        for (Index kh = 0; kh < 3; ++kh) {
            for (Index kw = 0; kw < 3; ++kw) {
                const Scalar* row = cols.row(c * 9 + kh * 3 + kw).data();
                const Index dy = kh - 1, dx = kw - 1;
                for (Index y = 0; y < h; ++y) {
                    const Index sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const Index x0 = std::max<Index>(0, -dx);
                    const Index x1 = std::min<Index>(w, w - dx);
                    Scalar* dst = plane + sy * w;
                    const Scalar* src = row + y * w;
                    for (Index xx = x0; xx < x1; ++xx) dst[xx + dx] += src[xx];
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    require_conv_shapes(input, kernel, bias);
    const Index n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
    const Index co = kernel.dim(0), hw = h * w;
    Tensor y({n, co, h, w});
    ConstMatMap kmat(kernel.data(), co, ci * 9);
    MatrixRM cols(ci * 9, hw);
    for (Index i = 0; i < n; ++i) {
        im2col(input.data() + i * ci * hw, ci, h, w, cols);
        Eigen::Map<MatrixRM> out(y.data() + i * co * hw, co, hw);
        out.noalias() = kmat * cols;
        if (!bias.empty()) out.colwise() += bias.vec();
    }
    return y;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape) {
    const Index n = input_shape[0], ci = input_shape[1], h = input_shape[2], w = input_shape[3];
    const Index co = kernel.dim(0), hw = h * w;
    Tensor gx(input_shape);
    ConstMatMap kmat(kernel.data(), co, ci * 9);
    MatrixRM dcols(ci * 9, hw);
    for (Index i = 0; i < n; ++i) {
        ConstMatMap gout(grad_out.data() + i * co * hw, co, hw);
        dcols.noalias() = kmat.transpose() * gout;
        col2im(dcols, ci, h, w, gx.data() + i * ci * hw);
    }
    return gx;
}

Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape) {
    const Index n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
    const Index co = kernel_shape[0], hw = h * w;
    Tensor gk(kernel_shape);
    Eigen::Map<MatrixRM> gkmat(gk.data(), co, ci * 9);
    MatrixRM cols(ci * 9, hw);
    for (Index i = 0; i < n; ++i) {
        im2col(input.data() + i * ci * hw, ci, h, w, cols);
        ConstMatMap gout(grad_out.data() + i * co * hw, co, hw);
        gkmat.noalias() += gout * cols.transpose();
    }
    return gk;
}

Tensor conv2d_grad_bias(const Tensor& grad_out) {
    const Index n = grad_out.dim(0), co = grad_out.dim(1), hw = grad_out.dim(2) * grad_out.dim(3);
    Tensor gb({co});
    for (Index i = 0; i < n; ++i) {
        ConstMatMap gout(grad_out.data() + i * co * hw, co, hw);
        gb.vec() += gout.rowwise().sum();
    }
    return gb;
}

Tensor adaptive_avg_pool_1x1(const Tensor& input) {
    if (input.rank() != 4) throw DimensionError("adaptive_avg_pool_1x1: input must be [N,C,H,W]");
    const Index n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    Tensor y({n, c});
    ConstMatMap planes(input.data(), n * c, hw);
    Eigen::Map<Vector>(y.data(), n * c) = planes.rowwise().sum() / static_cast<Scalar>(hw);
    return y;
}

namespace {

void require_labels(Index n, Index k, const std::vector<int>& labels, const char* op) {
    if (static_cast<Index>(labels.size()) != n)
        throw DimensionError(std::string(op) + ": label count does not match batch");
    for (int y : labels)
        if (y < 0 || y >= k)
            throw InputError(std::string(op) + ": label " + std::to_string(y) + " out of range [0," +
                             std::to_string(k) + ")");
}

}  // namespace

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw DimensionError("softmax_cross_entropy: logits must be [N,K]");
    const Index n = logits.dim(0), k = logits.dim(1);
    require_labels(n, k, labels, "softmax_cross_entropy");
    Scalar total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const Scalar* z = logits.data() + i * k;
        Scalar m = z[0];
        for (Index j = 1; j < k; ++j) m = std::max(m, z[j]);
        Scalar lse = 0.0;
        for (Index j = 0; j < k; ++j) lse += std::exp(z[j] - m);
        total += std::log(lse) + m - z[labels[static_cast<std::size_t>(i)]];
    }
    return Tensor::scalar(total / static_cast<Scalar>(n));
}

Tensor softmax_cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels) {
    const Index n = logits.dim(0), k = logits.dim(1);
    Tensor g(logits.shape());
    for (Index i = 0; i < n; ++i) {
        const Scalar* z = logits.data() + i * k;
        Scalar* gz = g.data() + i * k;
        Scalar m = z[0];
        for (Index j = 1; j < k; ++j) m = std::max(m, z[j]);
        Scalar lse = 0.0;
        for (Index j = 0; j < k; ++j) lse += std::exp(z[j] - m);
        for (Index j = 0; j < k; ++j) gz[j] = std::exp(z[j] - m) / lse / static_cast<Scalar>(n);
        gz[labels[static_cast<std::size_t>(i)]] -= 1.0 / static_cast<Scalar>(n);
    }
    return g;
}

namespace {

void require_binary_logits(const Tensor& logits, const char* op) {
    const bool ok = logits.rank() == 1 || (logits.rank() == 2 && logits.dim(1) == 1);
    if (!ok) throw DimensionError(std::string(op) + ": logits must be [N] or [N,1]");
}

}  // namespace

Tensor sigmoid_bce(const Tensor& logits, const std::vector<int>& labels) {
    require_binary_logits(logits, "sigmoid_bce");
    const Index n = logits.dim(0);
    require_labels(n, 2, labels, "sigmoid_bce");
    Scalar total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const Scalar z = logits[i];
        const Scalar y = static_cast<Scalar>(labels[static_cast<std::size_t>(i)]);
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    return Tensor::scalar(total / static_cast<Scalar>(n));
}

Tensor sigmoid_bce_grad(const Tensor& logits, const std::vector<int>& labels) {
    const Index n = logits.dim(0);
    Tensor g(logits.shape());
    for (Index i = 0; i < n; ++i) {
        const Scalar p = 1.0 / (1.0 + std::exp(-logits[i]));
        g[i] = (p - static_cast<Scalar>(labels[static_cast<std::size_t>(i)])) / static_cast<Scalar>(n);
    }
    return g;
}

Tensor take_rows(const Tensor& t, const std::vector<Index>& rows) {
    if (t.rank() < 1) throw DimensionError("take_rows: rank >= 1 required");
    const Index rec = t.size() / t.dim(0);
    Shape shape = t.shape();
    shape[0] = static_cast<Index>(rows.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Index r = rows[i];
        if (r < 0 || r >= t.dim(0)) throw InputError("take_rows: row index out of range");
        std::copy(t.data() + r * rec, t.data() + (r + 1) * rec, out.data() + static_cast<Index>(i) * rec);
    }
    return out;
}

}  // namespace dlgn
