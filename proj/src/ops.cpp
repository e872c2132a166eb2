#include "attrsim/ops.hpp"

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>

#include "attrsim/errors.hpp"

namespace attrsim {

namespace {

// C (m x n) += A (m x kk) * B (kk x n). Row-major, j innermost so the hot
// loop runs over contiguous memory.
void gemm_nn(int m, int kk, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * kk;
        double* c_row = C + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < kk; ++k) {
            double a = a_row[k];
            if (a == 0.0) {
                continue;
            }
            const double* b_row = B + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) {
                c_row[j] += a * b_row[j];
            }
        }
    }
}

// C (m x n) += A^T * B where A is (kk x m), B is (kk x n).
void gemm_tn(int m, int kk, int n, const double* A, const double* B, double* C) {
    for (int k = 0; k < kk; ++k) {
        const double* a_row = A + static_cast<std::size_t>(k) * m;
        const double* b_row = B + static_cast<std::size_t>(k) * n;
        for (int i = 0; i < m; ++i) {
            double a = a_row[i];
            if (a == 0.0) {
                continue;
            }
            double* c_row = C + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                c_row[j] += a * b_row[j];
            }
        }
    }
}

// C (m x n) += A * B^T where A is (m x kk), B is (n x kk).
void gemm_nt(int m, int kk, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * kk;
        double* c_row = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b_row = B + static_cast<std::size_t>(j) * kk;
            double acc = 0.0;
            for (int k = 0; k < kk; ++k) {
                acc += a_row[k] * b_row[k];
            }
            c_row[j] += acc;
        }
    }
}

void check_ndim(const char* op, const Tensor& t, int want) {
    if (t.ndim() != want) {
        throw ShapeError(std::string(op) + ": expected a " + std::to_string(want) +
                         "-d tensor, got " + shape_str(t.shape()));
    }
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// Marks out as a tape product and pre-allocates its gradient buffer so the
// closure can read it unconditionally.
void enroll(Tape* tape, Tensor& out) {
    out.mark_on_tape(tape->id());
    out.grad_buffer();
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_ndim("matmul", a, 2);
    check_ndim("matmul", b, 2);
    if (a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: inner extents disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const int m = a.extent(0);
    const int kk = a.extent(1);
    const int n = b.extent(1);
    Tensor out = Tensor::zeros({m, n});
    gemm_nn(m, kk, n, a.data().data(), b.data().data(), out.mutable_data().data());

    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool ta = tracked(a);
    const bool tb = tracked(b);
    if (!ta && !tb) {
        return out;
    }
    enroll(tape, out);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, ta, tb, m, kk, n] {
        const double* g = oc.grad().data();
        if (ta) {
            gemm_nt(m, n, kk, g, bc.data().data(), ac.grad_buffer().data());
        }
        if (tb) {
            gemm_tn(kk, m, n, ac.data().data(), g, bc.grad_buffer().data());
        }
    });
    return out;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
    check_ndim("matvec", m, 2);
    check_ndim("matvec", v, 1);
    if (m.extent(1) != v.extent(0)) {
        throw ShapeError("matvec: extents disagree: " + shape_str(m.shape()) + " x " +
                         shape_str(v.shape()));
    }
    const int rows = m.extent(0);
    const int cols = m.extent(1);
    Tensor out = Tensor::zeros({rows});
    {
        const double* mp = m.data().data();
        const double* vp = v.data().data();
        double* op = out.mutable_data().data();
        for (int i = 0; i < rows; ++i) {
            const double* row = mp + static_cast<std::size_t>(i) * cols;
            double acc = 0.0;
            for (int j = 0; j < cols; ++j) {
                acc += row[j] * vp[j];
            }
            op[i] = acc;
        }
    }

    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool tm = tracked(m);
    const bool tv = tracked(v);
    if (!tm && !tv) {
        return out;
    }
    enroll(tape, out);
    Tensor mc = m, vc = v, oc = out;
    tape->record([mc, vc, oc, tm, tv, rows, cols] {
        const double* g = oc.grad().data();
        if (tm) {
            double* gm = mc.grad_buffer().data();
            const double* vp = vc.data().data();
            for (int i = 0; i < rows; ++i) {
                double gi = g[i];
                if (gi == 0.0) {
                    continue;
                }
                double* row = gm + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j) {
                    row[j] += gi * vp[j];
                }
            }
        }
        if (tv) {
            double* gv = vc.grad_buffer().data();
            const double* mp = mc.data().data();
            for (int i = 0; i < rows; ++i) {
                double gi = g[i];
                if (gi == 0.0) {
                    continue;
                }
                const double* row = mp + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j) {
                    gv[j] += gi * row[j];
                }
            }
        }
    });
    return out;
}

namespace {

// Unrolls k x k patches into a (c_in*k*k) x (oh*ow) matrix; out-of-image
// positions stay zero, which implements the zero padding.
std::shared_ptr<std::vector<double>> im2col(const double* in, int ci, int h, int w, int k,
                                            int stride, int pad, int oh, int ow) {
    auto col = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(ci) * k * k * oh * ow, 0.0);
    double* cp = col->data();
    for (int ic = 0; ic < ci; ++ic) {
        const double* plane = in + static_cast<std::size_t>(ic) * h * w;
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
                std::size_t row = (static_cast<std::size_t>(ic) * k + kr) * k + kc;
                double* dst = cp + row * (static_cast<std::size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride + kr - pad;
                    if (iy < 0 || iy >= h) {
                        continue;
                    }
                    const double* src_row = plane + static_cast<std::size_t>(iy) * w;
                    double* dst_row = dst + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride + kc - pad;
                        if (ix >= 0 && ix < w) {
                            dst_row[ox] = src_row[ix];
                        }
                    }
                }
            }
        }
    }
    return col;
}

void col2im_accumulate(const double* col, double* din, int ci, int h, int w, int k, int stride,
                       int pad, int oh, int ow) {
    for (int ic = 0; ic < ci; ++ic) {
        double* plane = din + static_cast<std::size_t>(ic) * h * w;
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
                std::size_t row = (static_cast<std::size_t>(ic) * k + kr) * k + kc;
                const double* src = col + row * (static_cast<std::size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride + kr - pad;
                    if (iy < 0 || iy >= h) {
                        continue;
                    }
                    double* dst_row = plane + static_cast<std::size_t>(iy) * w;
                    const double* src_row = src + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride + kc - pad;
                        if (ix >= 0 && ix < w) {
                            dst_row[ix] += src_row[ox];
                        }
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int padding) {
    check_ndim("conv2d", input, 3);
    check_ndim("conv2d", kernels, 4);
    if (stride < 1) {
        throw ContractError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    }
    if (padding < 0) {
        throw ContractError("conv2d: padding must be >= 0, got " + std::to_string(padding));
    }
    if (kernels.extent(2) != kernels.extent(3)) {
        throw ShapeError("conv2d: kernels must be square, got " + shape_str(kernels.shape()));
    }
    if (kernels.extent(1) != input.extent(0)) {
        throw ShapeError("conv2d: channel mismatch: input " + shape_str(input.shape()) +
                         " vs kernels " + shape_str(kernels.shape()));
    }
    const int ci = input.extent(0);
    const int h = input.extent(1);
    const int w = input.extent(2);
    const int co = kernels.extent(0);
    const int k = kernels.extent(2);
    if (k > h + 2 * padding || k > w + 2 * padding) {
        throw ShapeError("conv2d: kernel " + shape_str(kernels.shape()) +
                         " exceeds padded input " + shape_str(input.shape()) + " with padding " +
                         std::to_string(padding));
    }
    const int oh = (h + 2 * padding - k) / stride + 1;
    const int ow = (w + 2 * padding - k) / stride + 1;

    auto col = im2col(input.data().data(), ci, h, w, k, stride, padding, oh, ow);
    Tensor out = Tensor::zeros({co, oh, ow});
    const int patch = ci * k * k;
    gemm_nn(co, patch, oh * ow, kernels.data().data(), col->data(), out.mutable_data().data());

    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool ti = tracked(input);
    const bool tk = tracked(kernels);
    if (!ti && !tk) {
        return out;
    }
    enroll(tape, out);
    Tensor inc = input, kc2 = kernels, oc = out;
    tape->record([inc, kc2, oc, col, ti, tk, ci, h, w, co, k, stride, padding, oh, ow, patch] {
        const double* g = oc.grad().data();
        if (tk) {
            gemm_nt(co, oh * ow, patch, g, col->data(), kc2.grad_buffer().data());
        }
        if (ti) {
            std::vector<double> dcol(static_cast<std::size_t>(patch) * oh * ow, 0.0);
            gemm_tn(patch, co, oh * ow, kc2.data().data(), g, dcol.data());
            col2im_accumulate(dcol.data(), inc.grad_buffer().data(), ci, h, w, k, stride,
                              padding, oh, ow);
        }
    });
    return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    check_ndim("add_channel_bias", x, 3);
    check_ndim("add_channel_bias", bias, 1);
    if (bias.extent(0) != x.extent(0)) {
        throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
    }
    const int c = x.extent(0);
    const std::size_t plane = static_cast<std::size_t>(x.extent(1)) * x.extent(2);
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        const double* bp = bias.data().data();
        double* op = out.mutable_data().data();
        for (int ch = 0; ch < c; ++ch) {
            double b = bp[ch];
            const double* src = xp + ch * plane;
            double* dst = op + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] = src[i] + b;
            }
        }
    }

    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool tx = tracked(x);
    const bool tb = tracked(bias);
    if (!tx && !tb) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, bc = bias, oc = out;
    tape->record([xc, bc, oc, tx, tb, c, plane] {
        const double* g = oc.grad().data();
        if (tx) {
            double* gx = xc.grad_buffer().data();
            for (std::size_t i = 0; i < c * plane; ++i) {
                gx[i] += g[i];
            }
        }
        if (tb) {
            double* gb = bc.grad_buffer().data();
            for (int ch = 0; ch < c; ++ch) {
                const double* row = g + ch * plane;
                double acc = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    acc += row[i];
                }
                gb[ch] += acc;
            }
        }
    });
    return out;
}

Tensor activation(const Tensor& x, Activation kind) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        const std::size_t n = x.size();
        switch (kind) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) {
                op[i] = std::tanh(xp[i]);
            }
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) {
                op[i] = xp[i] > 0.0 ? xp[i] : 0.0;
            }
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                op[i] = 1.0 / (1.0 + std::exp(-xp[i]));
            }
            break;
        }
    }

    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    // All three derivatives are functions of the output alone; for relu,
    // y > 0 exactly when x > 0.
    Tensor xc = x, oc = out;
    tape->record([xc, oc, kind] {
        const double* g = oc.grad().data();
        const double* y = oc.data().data();
        double* gx = xc.grad_buffer().data();
        const std::size_t n = oc.size();
        switch (kind) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) {
                gx[i] += g[i] * (1.0 - y[i] * y[i]);
            }
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) {
                gx[i] += y[i] > 0.0 ? g[i] : 0.0;
            }
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                gx[i] += g[i] * y[i] * (1.0 - y[i]);
            }
            break;
        }
    });
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.ndim()) {
        throw ContractError("softmax: axis " + std::to_string(axis) +
                            " out of range for shape " + shape_str(x.shape()));
    }
    const auto& shape = x.shape();
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) {
        outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
    }
    for (int i = axis + 1; i < x.ndim(); ++i) {
        inner *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
    }
    const std::size_t axis_n = static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]);

    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * axis_n * inner + in;
                double mx = xp[base];
                for (std::size_t a = 1; a < axis_n; ++a) {
                    mx = std::max(mx, xp[base + a * inner]);
                }
                double sum = 0.0;
                for (std::size_t a = 0; a < axis_n; ++a) {
                    double e = std::exp(xp[base + a * inner] - mx);
                    op[base + a * inner] = e;
                    sum += e;
                }
                for (std::size_t a = 0; a < axis_n; ++a) {
                    op[base + a * inner] /= sum;
                }
            }
        }
    }

    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, outer, inner, axis_n] {
        const double* g = oc.grad().data();
        const double* y = oc.data().data();
        double* gx = xc.grad_buffer().data();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * axis_n * inner + in;
                double dot = 0.0;
                for (std::size_t a = 0; a < axis_n; ++a) {
                    dot += g[base + a * inner] * y[base + a * inner];
                }
                for (std::size_t a = 0; a < axis_n; ++a) {
                    const std::size_t i = base + a * inner;
                    gx[i] += y[i] * (g[i] - dot);
                }
            }
        }
    });
    return out;
}

namespace {

enum class Binary { Add, Sub, Mul, Div };

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Binary op) {
    check_same_shape(name, a, b);
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.size();
    {
        const double* ap = a.data().data();
        const double* bp = b.data().data();
        double* op_ = out.mutable_data().data();
        switch (op) {
        case Binary::Add:
            for (std::size_t i = 0; i < n; ++i) {
                op_[i] = ap[i] + bp[i];
            }
            break;
        case Binary::Sub:
            for (std::size_t i = 0; i < n; ++i) {
                op_[i] = ap[i] - bp[i];
            }
            break;
        case Binary::Mul:
            for (std::size_t i = 0; i < n; ++i) {
                op_[i] = ap[i] * bp[i];
            }
            break;
        case Binary::Div:
            for (std::size_t i = 0; i < n; ++i) {
                op_[i] = ap[i] / bp[i];
            }
            break;
        }
    }

    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool ta = tracked(a);
    const bool tb = tracked(b);
    if (!ta && !tb) {
        return out;
    }
    enroll(tape, out);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, ta, tb, op, n] {
        const double* g = oc.grad().data();
        const double* ap = ac.data().data();
        const double* bp = bc.data().data();
        double* ga = ta ? ac.grad_buffer().data() : nullptr;
        double* gb = tb ? bc.grad_buffer().data() : nullptr;
        switch (op) {
        case Binary::Add:
            for (std::size_t i = 0; i < n; ++i) {
                if (ga) {
                    ga[i] += g[i];
                }
                if (gb) {
                    gb[i] += g[i];
                }
            }
            break;
        case Binary::Sub:
            for (std::size_t i = 0; i < n; ++i) {
                if (ga) {
                    ga[i] += g[i];
                }
                if (gb) {
                    gb[i] -= g[i];
                }
            }
            break;
        case Binary::Mul:
            for (std::size_t i = 0; i < n; ++i) {
                if (ga) {
                    ga[i] += g[i] * bp[i];
                }
                if (gb) {
                    gb[i] += g[i] * ap[i];
                }
            }
            break;
        case Binary::Div:
            for (std::size_t i = 0; i < n; ++i) {
                if (ga) {
                    ga[i] += g[i] / bp[i];
                }
                if (gb) {
                    gb[i] -= g[i] * ap[i] / (bp[i] * bp[i]);
                }
            }
            break;
        }
    });
    return out;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op("add", a, b, Binary::Add);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op("sub", a, b, Binary::Sub);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op("mul", a, b, Binary::Mul);
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op("div", a, b, Binary::Div);
}

Tensor add_scalar(const Tensor& x, double s) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            op[i] = xp[i] + s;
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc] {
        const double* g = oc.grad().data();
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < oc.size(); ++i) {
            gx[i] += g[i];
        }
    });
    return out;
}

Tensor mul_scalar(const Tensor& x, double s) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            op[i] = xp[i] * s;
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, s] {
        const double* g = oc.grad().data();
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < oc.size(); ++i) {
            gx[i] += g[i] * s;
        }
    });
    return out;
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) {
        acc += v;
    }
    Tensor out = Tensor::scalar(acc);
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc] {
        double g = oc.grad()[0];
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < xc.size(); ++i) {
            gx[i] += g;
        }
    });
    return out;
}

Tensor sum_channels(const Tensor& chw) {
    check_ndim("sum_channels", chw, 3);
    const int c = chw.extent(0);
    const int h = chw.extent(1);
    const int w = chw.extent(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor out = Tensor::zeros({h, w});
    {
        const double* xp = chw.data().data();
        double* op = out.mutable_data().data();
        for (int ch = 0; ch < c; ++ch) {
            const double* src = xp + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                op[i] += src[i];
            }
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(chw)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = chw, oc = out;
    tape->record([xc, oc, c, plane] {
        const double* g = oc.grad().data();
        double* gx = xc.grad_buffer().data();
        for (int ch = 0; ch < c; ++ch) {
            double* dst = gx + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] += g[i];
            }
        }
    });
    return out;
}

Tensor sum_spatial(const Tensor& chw) {
    check_ndim("sum_spatial", chw, 3);
    const int c = chw.extent(0);
    const std::size_t plane = static_cast<std::size_t>(chw.extent(1)) * chw.extent(2);
    Tensor out = Tensor::zeros({c});
    {
        const double* xp = chw.data().data();
        double* op = out.mutable_data().data();
        for (int ch = 0; ch < c; ++ch) {
            const double* src = xp + ch * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                acc += src[i];
            }
            op[ch] = acc;
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(chw)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = chw, oc = out;
    tape->record([xc, oc, c, plane] {
        const double* g = oc.grad().data();
        double* gx = xc.grad_buffer().data();
        for (int ch = 0; ch < c; ++ch) {
            double gc = g[ch];
            double* dst = gx + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] += gc;
            }
        }
    });
    return out;
}

Tensor scale_channels(const Tensor& chw, const Tensor& s) {
    check_ndim("scale_channels", chw, 3);
    check_ndim("scale_channels", s, 1);
    if (s.extent(0) != chw.extent(0)) {
        throw ShapeError("scale_channels: scale " + shape_str(s.shape()) +
                         " does not match channels of " + shape_str(chw.shape()));
    }
    const int c = chw.extent(0);
    const std::size_t plane = static_cast<std::size_t>(chw.extent(1)) * chw.extent(2);
    Tensor out = Tensor::zeros(chw.shape());
    {
        const double* xp = chw.data().data();
        const double* sp = s.data().data();
        double* op = out.mutable_data().data();
        for (int ch = 0; ch < c; ++ch) {
            double sv = sp[ch];
            const double* src = xp + ch * plane;
            double* dst = op + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] = src[i] * sv;
            }
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool tx = tracked(chw);
    const bool ts = tracked(s);
    if (!tx && !ts) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = chw, sc = s, oc = out;
    tape->record([xc, sc, oc, tx, ts, c, plane] {
        const double* g = oc.grad().data();
        if (tx) {
            double* gx = xc.grad_buffer().data();
            const double* sp = sc.data().data();
            for (int ch = 0; ch < c; ++ch) {
                double sv = sp[ch];
                const double* grow = g + ch * plane;
                double* dst = gx + ch * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    dst[i] += grow[i] * sv;
                }
            }
        }
        if (ts) {
            double* gs = sc.grad_buffer().data();
            const double* xp = xc.data().data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + ch * plane;
                const double* xrow = xp + ch * plane;
                double acc = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    acc += grow[i] * xrow[i];
                }
                gs[ch] += acc;
            }
        }
    });
    return out;
}

Tensor scale_spatial(const Tensor& chw, const Tensor& s) {
    check_ndim("scale_spatial", chw, 3);
    check_ndim("scale_spatial", s, 2);
    if (s.extent(0) != chw.extent(1) || s.extent(1) != chw.extent(2)) {
        throw ShapeError("scale_spatial: scale " + shape_str(s.shape()) +
                         " does not match spatial grid of " + shape_str(chw.shape()));
    }
    const int c = chw.extent(0);
    const std::size_t plane = static_cast<std::size_t>(chw.extent(1)) * chw.extent(2);
    Tensor out = Tensor::zeros(chw.shape());
    {
        const double* xp = chw.data().data();
        const double* sp = s.data().data();
        double* op = out.mutable_data().data();
        for (int ch = 0; ch < c; ++ch) {
            const double* src = xp + ch * plane;
            double* dst = op + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] = src[i] * sp[i];
            }
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool tx = tracked(chw);
    const bool ts = tracked(s);
    if (!tx && !ts) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = chw, sc = s, oc = out;
    tape->record([xc, sc, oc, tx, ts, c, plane] {
        const double* g = oc.grad().data();
        if (tx) {
            double* gx = xc.grad_buffer().data();
            const double* sp = sc.data().data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + ch * plane;
                double* dst = gx + ch * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    dst[i] += grow[i] * sp[i];
                }
            }
        }
        if (ts) {
            double* gs = sc.grad_buffer().data();
            const double* xp = xc.data().data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + ch * plane;
                const double* xrow = xp + ch * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    gs[i] += grow[i] * xrow[i];
                }
            }
        }
    });
    return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    check_ndim("concat", a, 1);
    check_ndim("concat", b, 1);
    const int na = a.extent(0);
    const int nb = b.extent(0);
    Tensor out = Tensor::zeros({na + nb});
    {
        double* op = out.mutable_data().data();
        const double* ap = a.data().data();
        const double* bp = b.data().data();
        for (int i = 0; i < na; ++i) {
            op[i] = ap[i];
        }
        for (int i = 0; i < nb; ++i) {
            op[na + i] = bp[i];
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr) {
        return out;
    }
    const bool ta = tracked(a);
    const bool tb = tracked(b);
    if (!ta && !tb) {
        return out;
    }
    enroll(tape, out);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, ta, tb, na, nb] {
        const double* g = oc.grad().data();
        if (ta) {
            double* ga = ac.grad_buffer().data();
            for (int i = 0; i < na; ++i) {
                ga[i] += g[i];
            }
        }
        if (tb) {
            double* gb = bc.grad_buffer().data();
            for (int i = 0; i < nb; ++i) {
                gb[i] += g[na + i];
            }
        }
    });
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    Tensor out = Tensor::zeros(shape);
    if (out.size() != x.size()) {
        throw ShapeError("reshape: element count of " + shape_str(x.shape()) +
                         " does not match " + shape_str(shape));
    }
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            op[i] = xp[i];
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc] {
        const double* g = oc.grad().data();
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < oc.size(); ++i) {
            gx[i] += g[i];
        }
    });
    return out;
}

Tensor select_row(const Tensor& matrix, int row) {
    check_ndim("select_row", matrix, 2);
    if (row < 0 || row >= matrix.extent(0)) {
        throw DomainError("select_row: row " + std::to_string(row) + " out of range for " +
                          shape_str(matrix.shape()));
    }
    const int cols = matrix.extent(1);
    Tensor out = Tensor::zeros({cols});
    {
        const double* mp = matrix.data().data() + static_cast<std::size_t>(row) * cols;
        double* op = out.mutable_data().data();
        for (int j = 0; j < cols; ++j) {
            op[j] = mp[j];
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(matrix)) {
        return out;
    }
    enroll(tape, out);
    Tensor mc = matrix, oc = out;
    tape->record([mc, oc, row, cols] {
        const double* g = oc.grad().data();
        double* gm = mc.grad_buffer().data() + static_cast<std::size_t>(row) * cols;
        for (int j = 0; j < cols; ++j) {
            gm[j] += g[j];
        }
    });
    return out;
}

Tensor sqrt_elem(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            op[i] = std::sqrt(xp[i]);
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc] {
        const double* g = oc.grad().data();
        const double* y = oc.data().data();
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < oc.size(); ++i) {
            gx[i] += g[i] * 0.5 / y[i];
        }
    });
    return out;
}

Tensor clamp_min(const Tensor& x, double floor) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.mutable_data().data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            // Written so NaN propagates instead of collapsing to the floor;
            // a poisoned loss must stay visibly non-finite.
            op[i] = xp[i] < floor ? floor : xp[i];
        }
    }
    Tape* tape = Tape::active();
    if (tape == nullptr || !tracked(x)) {
        return out;
    }
    enroll(tape, out);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, floor] {
        const double* g = oc.grad().data();
        const double* xp = xc.data().data();
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < oc.size(); ++i) {
            if (xp[i] > floor) {
                gx[i] += g[i];
            }
        }
    });
    return out;
}

Tensor detach(const Tensor& x) {
    std::vector<double> copy(x.data().begin(), x.data().end());
    return Tensor::from_data(x.shape(), std::move(copy));
}

} // namespace attrsim
